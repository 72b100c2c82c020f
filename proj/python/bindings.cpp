#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "metaspo/evaluation.hpp"
#include "metaspo/rng.hpp"
#include "metaspo/runner.hpp"

namespace py = pybind11;
using namespace metaspo;

namespace {

py::list messages_to_list(const std::vector<Message>& messages) {
  py::list out;
  for (const auto& message : messages)
    out.append(py::make_tuple(std::string(to_string(message.role)), message.content));
  return out;
}

// Shared wiring for the operations that need a backend: synthetic spec +
// optional cache dir, an in-memory event sink.
struct PySession {
  explicit PySession(const std::filesystem::path& spec_path,
                     const std::optional<std::filesystem::path>& cache_dir) {
    auto synthetic_backend = std::make_shared<SyntheticBackend>(SyntheticSpec::load(spec_path));
    synthetic = synthetic_backend;
    if (cache_dir) {
      cache = std::make_shared<CachingBackend>(synthetic_backend, *cache_dir);
      backend = cache;
    } else {
      backend = synthetic_backend;
    }
  }

  std::shared_ptr<Backend> backend;
  std::shared_ptr<SyntheticBackend> synthetic;
  std::shared_ptr<CachingBackend> cache;
  MemorySink sink;
};

}  // namespace

PYBIND11_MODULE(metaspo, m) {
  m.doc() = "Bilevel system-prompt optimization: core operations and runners";

  py::enum_<Role>(m, "Role").value("System", Role::System).value("User", Role::User);
  py::enum_<Origin>(m, "Origin")
      .value("Initial", Origin::Initial)
      .value("Generated", Origin::Generated)
      .value("Induced", Origin::Induced);
  py::enum_<InputMode>(m, "InputMode")
      .value("Separated", InputMode::Separated)
      .value("Unified", InputMode::Unified);
  py::enum_<Metric>(m, "Metric")
      .value("Accuracy", Metric::Accuracy)
      .value("BinaryF1", Metric::BinaryF1)
      .value("ExactMatch", Metric::ExactMatch);
  py::enum_<Strategy>(m, "Strategy")
      .value("AnalyzeGenerate", Strategy::AnalyzeGenerate)
      .value("Resample", Strategy::Resample)
      .value("EvolutionaryCrossMutate", Strategy::EvolutionaryCrossMutate);

  py::class_<Lineage>(m, "Lineage")
      .def(py::init<>())
      .def(py::init([](int iteration, int candidate, Origin origin) {
             return Lineage{iteration, candidate, origin};
           }),
           py::arg("iteration"), py::arg("candidate"), py::arg("origin") = Origin::Generated)
      .def_readwrite("iteration_index", &Lineage::iteration_index)
      .def_readwrite("candidate_index", &Lineage::candidate_index)
      .def_readwrite("origin", &Lineage::origin);

  py::class_<PromptText>(m, "PromptText")
      .def(py::init<>())
      .def(py::init([](Role role, std::string text, Lineage lineage) {
             return PromptText{role, std::move(text), lineage};
           }),
           py::arg("role"), py::arg("text"), py::arg("lineage") = Lineage{})
      .def_readwrite("role", &PromptText::role)
      .def_readwrite("text", &PromptText::text)
      .def_readwrite("lineage", &PromptText::lineage);

  py::class_<Example>(m, "Example")
      .def(py::init([](std::string id, std::string query, std::string answer) {
             return Example{std::move(id), std::move(query), std::move(answer)};
           }),
           py::arg("id"), py::arg("query"), py::arg("answer"))
      .def_readwrite("id", &Example::id)
      .def_readwrite("query", &Example::query)
      .def_readwrite("answer", &Example::answer);

  py::class_<Task>(m, "Task")
      .def(py::init<>())
      .def_readwrite("name", &Task::name)
      .def_readwrite("domain", &Task::domain)
      .def_readwrite("metric", &Task::metric)
      .def_readwrite("answer_format", &Task::answer_format)
      .def_readwrite("positive_label", &Task::positive_label)
      .def_readwrite("train", &Task::train)
      .def_readwrite("test", &Task::test);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("outer_iterations", &RunConfig::outer_iterations)
      .def_readwrite("sys_candidates_per_outer", &RunConfig::sys_candidates_per_outer)
      .def_readwrite("sys_keep", &RunConfig::sys_keep)
      .def_readwrite("user_candidates_per_inner", &RunConfig::user_candidates_per_inner)
      .def_readwrite("user_keep", &RunConfig::user_keep)
      .def_readwrite("wrong_examples_user", &RunConfig::wrong_examples_user)
      .def_readwrite("wrong_examples_system_per_task", &RunConfig::wrong_examples_system_per_task)
      .def_readwrite("base_temperature", &RunConfig::base_temperature)
      .def_readwrite("optimizer_temperature", &RunConfig::optimizer_temperature)
      .def_readwrite("train_sample_size", &RunConfig::train_sample_size)
      .def_readwrite("test_cap", &RunConfig::test_cap)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("input_mode", &RunConfig::input_mode)
      .def_readwrite("strategy", &RunConfig::strategy)
      .def_readwrite("concurrency_limit", &RunConfig::concurrency_limit)
      .def_readwrite("variant_candidates", &RunConfig::variant_candidates)
      .def("validate", &RunConfig::validate);

  // core
  m.def("default_system_prompt", &default_system_prompt);
  m.def(
      "render_input",
      [](const PromptText& s, const PromptText& u, const std::string& q, InputMode mode) {
        return messages_to_list(render_input(s, u, q, mode));
      },
      py::arg("system_prompt"), py::arg("user_prompt"), py::arg("query"),
      py::arg("mode") = InputMode::Separated,
      "Render [s, u, q] into chat messages as (role, content) tuples.");
  m.def("count_placeholder", &count_placeholder, py::arg("text"),
        py::arg("placeholder") = std::string(kDefaultPlaceholder));

  // metrics
  m.def(
      "extract_answer",
      [](const std::string& raw, const std::string& tag, bool empty_fallback) {
        ExtractionRule rule;
        rule.tag = tag;
        rule.fallback = empty_fallback ? ExtractionRule::Fallback::Empty
                                       : ExtractionRule::Fallback::WholeResponseTrimmed;
        return extract_answer(raw, rule);
      },
      py::arg("raw"), py::arg("tag") = "answer", py::arg("empty_fallback") = false);
  m.def("score_accuracy", &score_accuracy);
  m.def("score_exact_match", &score_exact_match);
  m.def("score_binary_f1", &score_binary_f1, py::arg("records"),
        py::arg("positive_label") = "yes");

  // meta prompts
  py::class_<WrongExample>(m, "WrongExample")
      .def(py::init([](std::string system_prompt, std::string user_prompt, std::string response,
                       std::string prediction, std::string label) {
             return WrongExample{std::move(system_prompt), std::move(user_prompt),
                                 std::move(response), std::move(prediction), std::move(label)};
           }),
           py::arg("system_prompt"), py::arg("user_prompt"), py::arg("response"),
           py::arg("prediction"), py::arg("label"))
      .def_readwrite("system_prompt", &WrongExample::system_prompt)
      .def_readwrite("user_prompt", &WrongExample::user_prompt)
      .def_readwrite("response", &WrongExample::response)
      .def_readwrite("prediction", &WrongExample::prediction)
      .def_readwrite("label", &WrongExample::label);

  m.def("render_wrong_example", &render_wrong_example);
  m.def("render_user_analysis", [](const PromptText& s, const PromptText& u,
                                   const std::vector<WrongExample>& w) {
    return messages_to_list(render_user_analysis(s, u, w));
  });
  m.def("render_user_generation",
        [](const PromptText& s, const PromptText& u, const std::vector<WrongExample>& w,
           const std::string& analysis) {
          return messages_to_list(render_user_generation(s, u, w, analysis));
        });
  m.def("render_system_analysis",
        [](const PromptText& s, const std::vector<WrongExample>& w) {
          return messages_to_list(render_system_analysis(s, w));
        });
  m.def("render_system_generation", [](const PromptText& s, const std::string& analysis) {
    return messages_to_list(render_system_generation(s, analysis));
  });
  m.def("render_induction",
        [](const std::vector<std::pair<std::string, std::string>>& examples) {
          return messages_to_list(render_induction(examples));
        });
  m.def("parse_tagged", &parse_tagged);

  // selection
  m.def(
      "select_top_k",
      [](const std::vector<std::pair<PromptText, double>>& scored, int k) {
        CandidatePool pool;
        for (const auto& [prompt, score] : scored)
          pool.candidates.push_back(Candidate{prompt, score});
        const CandidatePool kept = select_top_k(pool, k);
        std::vector<std::pair<PromptText, double>> out;
        for (const auto& candidate : kept.candidates)
          out.emplace_back(candidate.prompt, *candidate.score);
        return out;
      },
      py::arg("scored_prompts"), py::arg("k"),
      "Top-k prompts by score (descending), ties broken by earliest lineage.");

  // evaluation / tasks
  m.def("bow_similarity", &bow_similarity);
  m.def("load_task", &load_task);
  m.def("sample_train", &sample_train, py::arg("task"), py::arg("size"), py::arg("seed"));

  // end-to-end drivers against the synthetic backend
  m.def(
      "run_synthetic_metaspo",
      [](const std::vector<std::filesystem::path>& task_manifests,
         const std::filesystem::path& synthetic_spec, const RunConfig& cfg,
         const std::optional<std::filesystem::path>& cache_dir) {
        PySession session(synthetic_spec, cache_dir);
        std::vector<Task> tasks;
        std::vector<PromptText> initial_users;
        int index = 0;
        for (const auto& path : task_manifests) {
          Task task = load_task(path);
          Task sampled =
              sample_train(task, cfg.train_sample_size, derive_seed(cfg.seed, "train." + task.name));
          if (auto text = load_initial_user_prompt(path)) {
            PromptText prompt{Role::User, *text, Lineage{0, index, Origin::Initial}};
            validate_prompt(prompt);
            initial_users.push_back(std::move(prompt));
          } else {
            initial_users.push_back(default_initial_user_prompt(sampled, index));
          }
          tasks.push_back(std::move(sampled));
          ++index;
        }
        OptimizeEnv env{*session.backend, session.sink, "py"};
        const OptimizeResult result =
            run_metaspo(tasks, initial_users, default_system_prompt(), cfg, env);
        py::dict out;
        out["system_prompt"] = result.system.text;
        out["final_train_mean"] = result.final_train_mean;
        out["backend_calls"] = session.synthetic->calls();
        out["events"] = session.sink.events.size();
        return out;
      },
      py::arg("task_manifests"), py::arg("synthetic_spec"), py::arg("cfg") = RunConfig{},
      py::arg("cache_dir") = py::none(),
      "Run the full bilevel optimization against the synthetic backend.");

  m.def(
      "induce_user_prompts",
      [](const std::filesystem::path& task_manifest, int n,
         const std::filesystem::path& synthetic_spec, const RunConfig& cfg) {
        PySession session(synthetic_spec, std::nullopt);
        OptimizeEnv env{*session.backend, session.sink, "py"};
        const Task task = load_task(task_manifest);
        std::vector<std::string> out;
        for (const auto& prompt : induce_user_prompts(task, n, cfg, env))
          out.push_back(prompt.text);
        return out;
      },
      py::arg("task_manifest"), py::arg("n"), py::arg("synthetic_spec"),
      py::arg("cfg") = RunConfig{});

  // error types surface as python exceptions
  py::register_exception<UsageError>(m, "UsageError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<BackendError>(m, "BackendError");
}
