#include "metaspo/runner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <sstream>

#include "metaspo/rng.hpp"
#include "metaspo/tags.hpp"

namespace metaspo {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw MissingFile(std::string(what) + " not found: " + path.string());
  try {
    json payload;
    in >> payload;
    return payload;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(std::string(what) + " not found: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<Example> read_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("task data file not found: " + path.string());
  std::vector<Example> examples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.contains("id") || !record["id"].is_string() || !record.contains("query") ||
        !record["query"].is_string() || !record.contains("answer") ||
        !record["answer"].is_string())
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected string fields id, query, answer");
    Example example{record["id"].get<std::string>(), record["query"].get<std::string>(),
                    record["answer"].get<std::string>()};
    if (example.query.empty() || example.answer.empty())
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": query and answer must be non-empty");
    examples.push_back(std::move(example));
  }
  return examples;
}

void run_config_from_json(RunConfig& cfg, const json& payload) {
  cfg.outer_iterations = payload.value("outer_iterations", cfg.outer_iterations);
  cfg.sys_candidates_per_outer =
      payload.value("sys_candidates_per_outer", cfg.sys_candidates_per_outer);
  cfg.sys_keep = payload.value("sys_keep", cfg.sys_keep);
  cfg.user_candidates_per_inner =
      payload.value("user_candidates_per_inner", cfg.user_candidates_per_inner);
  cfg.user_keep = payload.value("user_keep", cfg.user_keep);
  cfg.wrong_examples_user = payload.value("wrong_examples_user", cfg.wrong_examples_user);
  cfg.wrong_examples_system_per_task =
      payload.value("wrong_examples_system_per_task", cfg.wrong_examples_system_per_task);
  cfg.base_temperature = payload.value("base_temperature", cfg.base_temperature);
  cfg.optimizer_temperature = payload.value("optimizer_temperature", cfg.optimizer_temperature);
  cfg.train_sample_size = payload.value("train_sample_size", cfg.train_sample_size);
  cfg.test_cap = payload.value("test_cap", cfg.test_cap);
  cfg.seed = payload.value("seed", cfg.seed);
  cfg.concurrency_limit = payload.value("concurrency_limit", cfg.concurrency_limit);
  cfg.variant_candidates = payload.value("variant_candidates", cfg.variant_candidates);
  if (payload.contains("input_mode"))
    cfg.input_mode = payload["input_mode"].get<std::string>() == "unified" ? InputMode::Unified
                                                                           : InputMode::Separated;
  if (payload.contains("strategy"))
    cfg.strategy = strategy_from_string(payload["strategy"].get<std::string>());
}

ordered_json run_config_to_json(const RunConfig& cfg) {
  return {{"outer_iterations", cfg.outer_iterations},
          {"sys_candidates_per_outer", cfg.sys_candidates_per_outer},
          {"sys_keep", cfg.sys_keep},
          {"user_candidates_per_inner", cfg.user_candidates_per_inner},
          {"user_keep", cfg.user_keep},
          {"wrong_examples_user", cfg.wrong_examples_user},
          {"wrong_examples_system_per_task", cfg.wrong_examples_system_per_task},
          {"base_temperature", cfg.base_temperature},
          {"optimizer_temperature", cfg.optimizer_temperature},
          {"train_sample_size", cfg.train_sample_size},
          {"test_cap", cfg.test_cap},
          {"seed", cfg.seed},
          {"input_mode", to_string(cfg.input_mode)},
          {"strategy", to_string(cfg.strategy)},
          {"concurrency_limit", cfg.concurrency_limit},
          {"variant_candidates", cfg.variant_candidates}};
}

ordered_json lineage_json(const Lineage& lineage) {
  return {{"iteration", lineage.iteration_index},
          {"candidate", lineage.candidate_index},
          {"origin", to_string(lineage.origin)}};
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

OptimizeEnv make_env(Backend& backend, EventSink& log, const AppConfig& app) {
  return OptimizeEnv{backend,
                     log,
                     app.run_id,
                     app.backend.base_model,
                     app.backend.optimizer_model,
                     app.backend.base_max_tokens,
                     app.backend.optimizer_max_tokens};
}

struct LoadedTask {
  Task task;
  PromptText initial_user;
};

std::vector<LoadedTask> load_source_tasks(const AppConfig& app) {
  if (app.source_tasks.empty()) throw UsageError("config lists no source_tasks");
  std::vector<LoadedTask> loaded;
  int index = 0;
  for (const auto& path : app.source_tasks) {
    Task task = load_task(path);
    if (task.train.empty()) throw DataError("source task " + task.name + " has no train examples");
    Task sampled = sample_train(task, app.cfg.train_sample_size,
                                derive_seed(app.cfg.seed, "train." + task.name));
    PromptText initial;
    if (auto text = load_initial_user_prompt(path)) {
      initial = PromptText{Role::User, *text, Lineage{0, index, Origin::Initial}};
      validate_prompt(initial);
    } else {
      initial = default_initial_user_prompt(sampled, index);
    }
    loaded.push_back(LoadedTask{std::move(sampled), std::move(initial)});
    ++index;
  }
  return loaded;
}

void write_run_manifest(const AppConfig& app, const std::filesystem::path& path) {
  ordered_json task_paths = ordered_json::array();
  for (const auto& p : app.source_tasks) task_paths.push_back(p.string());
  ordered_json target_paths = ordered_json::array();
  for (const auto& p : app.target_tasks) target_paths.push_back(p.string());
  const char* rev = std::getenv("METASPO_SOURCE_REV");
  ordered_json manifest{
      {"run_id", app.run_id},
      {"config", run_config_to_json(app.cfg)},
      {"task_paths", task_paths},
      {"target_task_paths", target_paths},
      {"backend",
       {{"kind", app.backend.kind},
        {"base_url", app.backend.base_url},
        {"base_model", app.backend.base_model},
        {"optimizer_model", app.backend.optimizer_model}}},
      {"source_revision", rev ? rev : "unknown"},
  };
  write_text_file(path, manifest.dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// Task files
// ---------------------------------------------------------------------------

Task load_task(const std::filesystem::path& manifest_path) {
  const json manifest = read_json_file(manifest_path, "task manifest");
  const auto dir = manifest_path.parent_path();

  Task task;
  try {
    task.name = manifest.at("name").get<std::string>();
    task.domain = manifest.value("domain", std::string("other"));
    task.metric = metric_from_string(manifest.at("metric").get<std::string>());
    task.answer_format = manifest.value("answer_format", std::string());
    task.positive_label = manifest.value("positive_label", std::string("yes"));
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  if (manifest.contains("train"))
    task.train = read_examples(dir / manifest["train"].get<std::string>());
  if (manifest.contains("test"))
    task.test = read_examples(dir / manifest["test"].get<std::string>());

  std::map<std::string, int> seen;
  for (const auto& example : task.train) ++seen[example.id];
  for (const auto& example : task.test) ++seen[example.id];
  for (const auto& [id, count] : seen)
    if (count > 1)
      throw DuplicateId("task " + task.name + ": duplicate example id '" + id + "'");

  if (!metric_matches_domain(task.domain, task.metric))
    throw DataError("task " + task.name + ": metric " + to_string(task.metric) +
                    " does not match the convention for domain '" + task.domain + "'");
  return task;
}

std::optional<std::string> load_initial_user_prompt(const std::filesystem::path& manifest_path) {
  const json manifest = read_json_file(manifest_path, "task manifest");
  if (!manifest.contains("initial_user_prompt")) return std::nullopt;
  return manifest["initial_user_prompt"].get<std::string>();
}

std::filesystem::path write_task(const Task& task, const std::filesystem::path& dir,
                                 const std::string& initial_user_prompt) {
  std::filesystem::create_directories(dir);
  auto dump_examples = [](const std::vector<Example>& examples,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& example : examples) {
      out << ordered_json{{"id", example.id}, {"query", example.query}, {"answer", example.answer}}
                 .dump()
          << "\n";
    }
  };
  const std::string train_name = task.name + ".train.jsonl";
  const std::string test_name = task.name + ".test.jsonl";
  dump_examples(task.train, dir / train_name);
  dump_examples(task.test, dir / test_name);

  ordered_json manifest{{"name", task.name},          {"domain", task.domain},
                        {"metric", to_string(task.metric)}, {"answer_format", task.answer_format},
                        {"positive_label", task.positive_label}, {"train", train_name},
                        {"test", test_name}};
  if (!initial_user_prompt.empty()) manifest["initial_user_prompt"] = initial_user_prompt;
  const auto manifest_path = dir / (task.name + ".manifest.json");
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

Task sample_train(const Task& task, int size, std::uint64_t seed) {
  if (size < 1) throw UsageError("sample_train: size must be >= 1");
  Task sampled = task;
  Rng rng(seed);
  const auto picks = rng.sample_indices(task.train.size(), static_cast<std::size_t>(size));
  sampled.train.clear();
  sampled.train.reserve(picks.size());
  for (const std::size_t index : picks) sampled.train.push_back(task.train[index]);
  return sampled;
}

// ---------------------------------------------------------------------------
// Run log
// ---------------------------------------------------------------------------

std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char base[32];
  std::strftime(base, sizeof base, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", base, static_cast<int>(ms.count()));
  return out;
}

JsonlRunLog::JsonlRunLog(const std::filesystem::path& path, bool truncate) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, truncate ? std::ios::trunc : std::ios::app);
  if (!out_) throw IoError("cannot open run log " + path.string());
}

void JsonlRunLog::emit(const RunEvent& event) {
  std::lock_guard lock(mutex_);
  if (!out_.is_open()) throw IoError("run log is closed: " + path_.string());
  ordered_json line{
      {"timestamp", event.timestamp.empty() ? utc_timestamp() : event.timestamp},
      {"run_id", event.run_id},
      {"kind", to_string(event.kind)},
      {"payload", event.payload},
  };
  out_ << line.dump() << "\n";
  out_.flush();
  if (!out_) throw IoError("failed appending to run log " + path_.string());
}

void JsonlRunLog::close() {
  std::lock_guard lock(mutex_);
  out_.close();
}

std::vector<RunEvent> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("run log not found: " + path.string());
  std::vector<RunEvent> events;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json record = json::parse(line);
      RunEvent event;
      event.timestamp = record.value("timestamp", std::string());
      event.run_id = record.value("run_id", std::string());
      event.kind = event_kind_from_string(record.at("kind").get<std::string>());
      event.payload = record.value("payload", json::object());
      events.push_back(std::move(event));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

AppConfig AppConfig::load(const std::filesystem::path& path) {
  const json payload = read_json_file(path, "config");
  const auto dir = path.parent_path();
  auto resolve = [&](const std::string& rel) { return dir / rel; };

  AppConfig app;
  app.run_id = payload.value("run_id", app.run_id);
  run_config_from_json(app.cfg, payload);

  if (payload.contains("backend")) {
    const json& backend = payload["backend"];
    app.backend.kind = backend.value("kind", app.backend.kind);
    if (backend.contains("spec")) app.backend.synthetic_spec = resolve(backend["spec"]);
    app.backend.base_url = backend.value("base_url", app.backend.base_url);
    app.backend.completions_path =
        backend.value("completions_path", app.backend.completions_path);
    app.backend.api_key_env = backend.value("api_key_env", app.backend.api_key_env);
    app.backend.timeout_ms = backend.value("timeout_ms", app.backend.timeout_ms);
    app.backend.max_attempts = backend.value("max_attempts", app.backend.max_attempts);
    app.backend.base_model = backend.value("base_model", app.backend.base_model);
    app.backend.optimizer_model = backend.value("optimizer_model", app.backend.optimizer_model);
    app.backend.base_max_tokens = backend.value("base_max_tokens", app.backend.base_max_tokens);
    app.backend.optimizer_max_tokens =
        backend.value("optimizer_max_tokens", app.backend.optimizer_max_tokens);
  }
  if (const char* base_url = std::getenv("METASPO_BASE_URL")) app.backend.base_url = base_url;

  if (payload.contains("cache_dir")) app.cache_dir = resolve(payload["cache_dir"]);
  if (payload.contains("output_dir")) app.output_dir = resolve(payload["output_dir"]);
  for (const auto& rel : payload.value("source_tasks", json::array()))
    app.source_tasks.push_back(resolve(rel.get<std::string>()));
  for (const auto& rel : payload.value("target_tasks", json::array()))
    app.target_tasks.push_back(resolve(rel.get<std::string>()));

  app.cfg.validate();
  return app;
}

BackendHandle make_backend(const AppConfig& app) {
  BackendHandle handle;
  std::shared_ptr<Backend> inner;
  if (app.backend.kind == "synthetic") {
    if (app.backend.synthetic_spec.empty())
      throw UsageError("synthetic backend requires backend.spec in the config");
    handle.synthetic =
        std::make_shared<SyntheticBackend>(SyntheticSpec::load(app.backend.synthetic_spec));
    inner = handle.synthetic;
  } else if (app.backend.kind == "http") {
    if (app.backend.base_url.empty())
      throw UsageError("http backend requires backend.base_url or METASPO_BASE_URL");
    HttpBackendOptions options;
    options.base_url = app.backend.base_url;
    options.completions_path = app.backend.completions_path;
    options.timeout_ms = app.backend.timeout_ms;
    options.max_attempts = app.backend.max_attempts;
    if (const char* key = std::getenv(app.backend.api_key_env.c_str())) options.api_key = key;
    inner = std::make_shared<HttpBackend>(std::move(options));
  } else {
    throw UsageError("unknown backend kind: " + app.backend.kind);
  }
  handle.cache = std::make_shared<CachingBackend>(std::move(inner), app.cache_dir);
  handle.backend = handle.cache;
  return handle;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

OptimizeSummary cmd_optimize(const AppConfig& app, Variant variant) {
  const auto loaded = load_source_tasks(app);
  std::vector<Task> tasks;
  std::vector<PromptText> initial_users;
  for (const auto& entry : loaded) {
    tasks.push_back(entry.task);
    initial_users.push_back(entry.initial_user);
  }

  BackendHandle handle = make_backend(app);
  std::filesystem::create_directories(app.output_dir);
  JsonlRunLog log(app.output_dir / "run.jsonl");
  OptimizeEnv env = make_env(*handle.backend, log, app);

  ordered_json task_names = ordered_json::array();
  for (const auto& task : tasks) task_names.push_back(task.name);
  emit_event(env, EventKind::RunStart,
             {{"command", "optimize"},
              {"variant", variant == Variant::MetaSpo ? "metaspo" : "outer-only"},
              {"strategy", to_string(app.cfg.strategy)},
              {"seed", app.cfg.seed},
              {"tasks", task_names}});

  const PromptText initial_system = default_system_prompt();
  const OptimizeResult result =
      variant == Variant::MetaSpo
          ? run_metaspo(tasks, initial_users, initial_system, app.cfg, env)
          : run_outer_only(tasks, initial_users, initial_system, app.cfg, env);

  emit_event(env, EventKind::RunEnd,
             {{"status", "ok"}, {"final_train_mean", result.final_train_mean}});
  log.close();

  // Artifacts.
  const auto system_path = app.output_dir / "system_prompt.txt";
  write_text_file(system_path, result.system.text);
  write_text_file(app.output_dir / "system_prompt.json",
                  ordered_json{{"text", result.system.text},
                               {"lineage", lineage_json(result.system.lineage)},
                               {"final_train_mean", result.final_train_mean},
                               {"run_id", app.run_id}}
                          .dump(2) +
                      "\n");

  ordered_json pools = ordered_json::array();
  for (const auto& state : result.task_states) {
    ordered_json prompts = ordered_json::array();
    for (const auto& candidate : state.user_pool.candidates)
      prompts.push_back({{"text", candidate.prompt.text},
                         {"lineage", lineage_json(candidate.prompt.lineage)},
                         {"score", candidate.score ? ordered_json(*candidate.score)
                                                   : ordered_json(nullptr)}});
    pools.push_back({{"task", state.task.name},
                     {"best", lineage_json(state.best_user.lineage)},
                     {"prompts", prompts}});
  }
  write_text_file(app.output_dir / "user_pools.json", pools.dump(2) + "\n");
  write_run_manifest(app, app.output_dir / "manifest.json");
  write_text_file(app.output_dir / "run_summary.json",
                  ordered_json{{"run_id", app.run_id},
                               {"final_train_mean", result.final_train_mean},
                               {"cache_hits", handle.cache->hits()},
                               {"cache_misses", handle.cache->misses()},
                               {"backend_calls", handle.cache->misses()}}
                          .dump(2) +
                      "\n");

  OptimizeSummary summary;
  summary.system_prompt = result.system.text;
  summary.final_train_mean = result.final_train_mean;
  summary.backend_calls = handle.cache->misses();
  summary.run_log = app.output_dir / "run.jsonl";
  summary.system_prompt_path = system_path;
  return summary;
}

PromptText load_system_prompt(const std::filesystem::path& path) {
  return PromptText{Role::System, read_text_file(path, "system prompt artifact"),
                    Lineage{0, 0, Origin::Initial}};
}

std::filesystem::path cmd_induce(const AppConfig& app, int count) {
  if (app.target_tasks.empty()) throw UsageError("config lists no target_tasks");
  BackendHandle handle = make_backend(app);
  NullSink sink;
  OptimizeEnv env = make_env(*handle.backend, sink, app);

  ordered_json artifact = ordered_json::object();
  for (const auto& path : app.target_tasks) {
    const Task task = load_task(path);
    const auto prompts = induce_user_prompts(task, count, app.cfg, env);
    ordered_json texts = ordered_json::array();
    for (const auto& prompt : prompts) texts.push_back(prompt.text);
    artifact[task.name] = texts;
  }
  const auto out_path = app.output_dir / "induced_prompts.json";
  write_text_file(out_path, artifact.dump(2) + "\n");
  return out_path;
}

EvaluateSummary cmd_evaluate(const AppConfig& app,
                             const std::optional<std::filesystem::path>& system_prompt_path,
                             bool induce) {
  if (app.target_tasks.empty()) throw UsageError("config lists no target_tasks");

  PromptText system_prompt;
  if (system_prompt_path) {
    system_prompt = load_system_prompt(*system_prompt_path);
  } else if (std::filesystem::exists(app.output_dir / "system_prompt.txt")) {
    system_prompt = load_system_prompt(app.output_dir / "system_prompt.txt");
  } else {
    system_prompt = default_system_prompt();
  }

  const auto induced_path = app.output_dir / "induced_prompts.json";
  if (!std::filesystem::exists(induced_path)) {
    if (!induce)
      throw DataError("induced prompts artifact missing: " + induced_path.string() +
                      " (run `metaspo induce-prompts` or pass --induce)");
    cmd_induce(app, 10);
  }
  const json induced = read_json_file(induced_path, "induced prompts artifact");

  std::vector<Task> targets;
  std::vector<std::vector<PromptText>> prompts;
  for (const auto& path : app.target_tasks) {
    Task task = load_task(path);
    if (!induced.contains(task.name))
      throw DataError("induced prompts artifact lacks task '" + task.name + "': " +
                      induced_path.string());
    std::vector<PromptText> task_prompts;
    int index = 0;
    for (const auto& text : induced[task.name]) {
      PromptText prompt{Role::User, text.get<std::string>(), Lineage{0, index++, Origin::Induced}};
      validate_prompt(prompt);
      task_prompts.push_back(std::move(prompt));
    }
    targets.push_back(std::move(task));
    prompts.push_back(std::move(task_prompts));
  }

  BackendHandle handle = make_backend(app);
  std::filesystem::create_directories(app.output_dir);
  JsonlRunLog log(app.output_dir / "evaluate.jsonl");
  OptimizeEnv env = make_env(*handle.backend, log, app);

  emit_event(env, EventKind::RunStart, {{"command", "evaluate"}, {"seed", app.cfg.seed}});
  const GeneralizationReport report =
      unseen_generalization(system_prompt, targets, prompts, app.cfg, env);
  emit_event(env, EventKind::RunEnd, {{"status", "ok"}, {"grand_mean", report.grand_mean}});
  log.close();

  // Line-oriented JSON report: one line per task, a trailing summary line.
  std::string jsonl;
  for (const auto& task_report : report.per_task) {
    ordered_json line{{"task", task_report.task_name},
                      {"scores", task_report.per_user_prompt_scores},
                      {"mean", task_report.mean}};
    jsonl += line.dump() + "\n";
  }
  jsonl += ordered_json{{"grand_mean", report.grand_mean},
                        {"system_prompt", report.system_prompt.text}}
               .dump() +
           "\n";
  const auto json_path = app.output_dir / "report.jsonl";
  write_text_file(json_path, jsonl);

  // Markdown: one column per task plus the average.
  std::string md = "|  |";
  for (const auto& task_report : report.per_task) md += " " + task_report.task_name + " |";
  md += " Avg. |\n|---|";
  for (std::size_t i = 0; i < report.per_task.size(); ++i) md += "---|";
  md += "---|\n| system |";
  for (const auto& task_report : report.per_task) md += " " + format_score(task_report.mean) + " |";
  md += " " + format_score(report.grand_mean) + " |\n";
  const auto md_path = app.output_dir / "report.md";
  write_text_file(md_path, md);

  return EvaluateSummary{report, json_path, md_path};
}

AdaptSummary cmd_adapt(const AppConfig& app,
                       const std::optional<std::filesystem::path>& system_prompt_path,
                       const std::string& task_name) {
  std::optional<std::filesystem::path> task_path;
  for (const auto& path : app.target_tasks) {
    if (load_task(path).name == task_name) {
      task_path = path;
      break;
    }
  }
  if (!task_path) throw UsageError("task '" + task_name + "' is not among target_tasks");

  Task task = load_task(*task_path);
  if (task.train.empty()) throw DataError("adaptation target has no train examples");
  Task sampled = sample_train(task, app.cfg.train_sample_size,
                              derive_seed(app.cfg.seed, "train." + task.name));

  PromptText initial;
  if (auto text = load_initial_user_prompt(*task_path)) {
    initial = PromptText{Role::User, *text, Lineage{0, 0, Origin::Initial}};
    validate_prompt(initial);
  } else {
    initial = default_initial_user_prompt(sampled, 0);
  }

  PromptText system_prompt =
      system_prompt_path ? load_system_prompt(*system_prompt_path) : default_system_prompt();

  BackendHandle handle = make_backend(app);
  std::filesystem::create_directories(app.output_dir);
  JsonlRunLog log(app.output_dir / "adapt.jsonl");
  OptimizeEnv env = make_env(*handle.backend, log, app);

  emit_event(env, EventKind::RunStart,
             {{"command", "adapt"}, {"task", task.name}, {"seed", app.cfg.seed}});
  const AdaptationResult result =
      test_time_adaptation(system_prompt, sampled, initial, app.cfg, env);
  emit_event(env, EventKind::RunEnd,
             {{"status", "ok"},
              {"train_score", result.train_score},
              {"test_score", result.test_score}});
  log.close();

  write_text_file(app.output_dir / "adapted_user_prompt.txt", result.best_user.text);
  write_text_file(app.output_dir / "adapt.json",
                  ordered_json{{"task", task.name},
                               {"system_prompt", system_prompt.text},
                               {"user_prompt", result.best_user.text},
                               {"train_score", result.train_score},
                               {"test_score", result.test_score}}
                          .dump(2) +
                      "\n");
  return AdaptSummary{result, app.output_dir / "adapt.jsonl"};
}

std::filesystem::path cmd_similarity(const AppConfig& app,
                                     const std::vector<std::filesystem::path>& task_paths) {
  std::vector<std::filesystem::path> paths = task_paths;
  if (paths.empty()) {
    paths = app.source_tasks;
    paths.insert(paths.end(), app.target_tasks.begin(), app.target_tasks.end());
  }
  if (paths.size() < 2) throw UsageError("similarity needs at least two tasks");

  std::vector<Task> tasks;
  for (const auto& path : paths) tasks.push_back(load_task(path));

  std::string md = "| task |";
  std::string csv = "task";
  for (const auto& task : tasks) {
    md += " " + task.name + " |";
    csv += "," + task.name;
  }
  md += "\n|---|";
  for (std::size_t i = 0; i < tasks.size(); ++i) md += "---|";
  md += "\n";
  csv += "\n";
  for (const auto& a : tasks) {
    md += "| " + a.name + " |";
    csv += a.name;
    for (const auto& b : tasks) {
      const double sim = bow_similarity(a, b);
      md += " " + format_score(sim) + " |";
      csv += "," + format_score(sim);
    }
    md += "\n";
    csv += "\n";
  }
  std::filesystem::create_directories(app.output_dir);
  write_text_file(app.output_dir / "similarity.csv", csv);
  const auto md_path = app.output_dir / "similarity.md";
  write_text_file(md_path, md);
  return md_path;
}

ReportSummary cmd_report(const std::filesystem::path& log_path,
                         const std::filesystem::path& out_dir, bool normalize_timestamps) {
  const auto events = read_run_log(log_path);
  std::filesystem::create_directories(out_dir);

  // Per-task means over EvalComplete events -> Table-style markdown / CSV.
  std::vector<std::string> task_order;
  std::map<std::string, std::pair<double, int>> task_scores;
  for (const auto& event : events) {
    if (event.kind != EventKind::EvalComplete) continue;
    const std::string task = event.payload.value("task", std::string());
    if (!task_scores.count(task)) task_order.push_back(task);
    auto& [sum, count] = task_scores[task];
    sum += event.payload.value("score", 0.0);
    count += 1;
  }

  std::string md = "|  |";
  std::string csv = "prompt";
  double mean_sum = 0.0;
  for (const auto& task : task_order) {
    md += " " + task + " |";
    csv += "," + task;
  }
  md += " Avg. |\n|---|";
  for (std::size_t i = 0; i < task_order.size(); ++i) md += "---|";
  md += "---|\n| system |";
  csv += ",avg\nsystem";
  for (const auto& task : task_order) {
    const auto& [sum, count] = task_scores[task];
    const double mean = count > 0 ? sum / count : 0.0;
    mean_sum += mean;
    md += " " + format_score(mean) + " |";
    csv += "," + format_score(mean);
  }
  const double grand = task_order.empty() ? 0.0 : mean_sum / task_order.size();
  md += " " + format_score(grand) + " |\n";
  csv += "," + format_score(grand) + "\n";

  // Score-vs-iteration plot data from Selection events.
  std::string plot = "scope,task,iteration,score\n";
  for (const auto& event : events) {
    if (event.kind != EventKind::Selection) continue;
    plot += event.payload.value("scope", std::string()) + "," +
            event.payload.value("task", std::string()) + "," +
            std::to_string(event.payload.value("iteration", 0)) + "," +
            format_score(event.payload.value("chosen_score", 0.0)) + "\n";
  }

  ReportSummary summary;
  summary.markdown = out_dir / "report.md";
  summary.csv = out_dir / "report.csv";
  summary.plot_data = out_dir / "plot_data.csv";
  write_text_file(summary.markdown, md);
  write_text_file(summary.csv, csv);
  write_text_file(summary.plot_data, plot);

  if (normalize_timestamps) {
    std::string normalized;
    for (const auto& event : events) {
      ordered_json line{{"timestamp", ""},
                        {"run_id", event.run_id},
                        {"kind", to_string(event.kind)},
                        {"payload", event.payload}};
      normalized += line.dump() + "\n";
    }
    summary.normalized_log = out_dir / "run.normalized.jsonl";
    write_text_file(*summary.normalized_log, normalized);
  }
  return summary;
}

}  // namespace metaspo
