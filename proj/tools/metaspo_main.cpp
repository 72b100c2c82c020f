#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metaspo/runner.hpp"

namespace {

using namespace metaspo;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> run_id;
  std::optional<std::string> cache_dir;
  std::optional<std::string> output_dir;
  std::optional<int> concurrency;
  std::optional<std::string> input_mode;
  std::optional<std::string> backend_kind;
};

void add_global_options(CLI::App* cmd, GlobalArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Run configuration file (JSON)")->required();
  cmd->add_option("--seed", args.seed, "Override the configured seed");
  cmd->add_option("--run-id", args.run_id, "Override the configured run id");
  cmd->add_option("--cache-dir", args.cache_dir, "Override the response cache directory");
  cmd->add_option("--output-dir", args.output_dir, "Override the output directory");
  cmd->add_option("--concurrency", args.concurrency, "Concurrent backend requests");
  cmd->add_option("--input-mode", args.input_mode, "separated | unified");
  cmd->add_option("--backend", args.backend_kind, "Backend profile kind: synthetic | http");
}

AppConfig load_app(const GlobalArgs& args) {
  AppConfig app = AppConfig::load(args.config_path);
  if (args.seed) app.cfg.seed = *args.seed;
  if (args.run_id) app.run_id = *args.run_id;
  if (args.cache_dir) app.cache_dir = *args.cache_dir;
  if (args.output_dir) app.output_dir = *args.output_dir;
  if (args.concurrency) app.cfg.concurrency_limit = *args.concurrency;
  if (args.input_mode)
    app.cfg.input_mode =
        *args.input_mode == "unified" ? InputMode::Unified : InputMode::Separated;
  if (args.backend_kind) app.backend.kind = *args.backend_kind;
  app.cfg.validate();
  return app;
}

int dispatch(int argc, char** argv) {
  CLI::App cli{"Bilevel system-prompt optimization"};
  cli.require_subcommand(1);

  // optimize
  GlobalArgs optimize_args;
  std::string variant = "metaspo";
  std::string strategy;
  std::optional<int> outer_iterations;
  auto* optimize = cli.add_subcommand("optimize", "Optimize a system prompt over source tasks");
  add_global_options(optimize, optimize_args);
  optimize->add_option("--variant", variant, "metaspo | outer-only");
  optimize->add_option("--strategy", strategy, "analyze-generate | resample | evo");
  optimize->add_option("--outer-iterations", outer_iterations, "Outer loop iterations");

  // evaluate
  GlobalArgs evaluate_args;
  std::string evaluate_system;
  bool induce_flag = false;
  auto* evaluate = cli.add_subcommand("evaluate", "Unseen generalization over target tasks");
  add_global_options(evaluate, evaluate_args);
  evaluate->add_option("--system-prompt", evaluate_system, "System prompt artifact (text file)");
  evaluate->add_flag("--induce", induce_flag, "Induce user prompts when the artifact is missing");

  // adapt
  GlobalArgs adapt_args;
  std::string adapt_system;
  std::string adapt_task;
  auto* adapt = cli.add_subcommand("adapt", "Test-time user prompt adaptation on one target");
  add_global_options(adapt, adapt_args);
  adapt->add_option("--system-prompt", adapt_system, "System prompt artifact (text file)");
  adapt->add_option("--task", adapt_task, "Target task name")->required();

  // induce-prompts
  GlobalArgs induce_args;
  int induce_count = 10;
  auto* induce = cli.add_subcommand("induce-prompts", "Induce user prompts for target tasks");
  add_global_options(induce, induce_args);
  induce->add_option("--count", induce_count, "Prompts per task");

  // similarity
  GlobalArgs similarity_args;
  std::vector<std::string> similarity_tasks;
  auto* similarity = cli.add_subcommand("similarity", "Pairwise Bag-of-Words task similarity");
  add_global_options(similarity, similarity_args);
  similarity->add_option("--tasks", similarity_tasks, "Task manifests (defaults to config tasks)");

  // report
  std::string report_log;
  std::string report_out = "report-out";
  bool normalize_timestamps = false;
  auto* report = cli.add_subcommand("report", "Render tables and plot data from a run log");
  report->add_option("--log", report_log, "Run log (JSONL)")->required();
  report->add_option("--out", report_out, "Output directory");
  report->add_flag("--normalize-timestamps", normalize_timestamps,
                   "Also write a timestamp-normalized copy of the log");

  CLI11_PARSE(cli, argc, argv);

  if (optimize->parsed()) {
    AppConfig app = load_app(optimize_args);
    if (!strategy.empty()) app.cfg.strategy = strategy_from_string(strategy);
    if (outer_iterations) app.cfg.outer_iterations = *outer_iterations;
    app.cfg.validate();
    if (variant != "metaspo" && variant != "outer-only")
      throw UsageError("unknown variant: " + variant);
    const auto summary =
        cmd_optimize(app, variant == "metaspo" ? Variant::MetaSpo : Variant::OuterOnly);
    std::printf("optimized system prompt -> %s\n", summary.system_prompt_path.c_str());
    std::printf("final train mean: %.4f (backend calls: %llu)\n", summary.final_train_mean,
                static_cast<unsigned long long>(summary.backend_calls));
    return 0;
  }
  if (evaluate->parsed()) {
    const AppConfig app = load_app(evaluate_args);
    const auto summary = cmd_evaluate(
        app,
        evaluate_system.empty() ? std::nullopt
                                : std::optional<std::filesystem::path>(evaluate_system),
        induce_flag);
    std::printf("grand mean: %.4f\n", summary.report.grand_mean);
    std::printf("report -> %s\n", summary.report_markdown.c_str());
    return 0;
  }
  if (adapt->parsed()) {
    const AppConfig app = load_app(adapt_args);
    const auto summary = cmd_adapt(
        app,
        adapt_system.empty() ? std::nullopt : std::optional<std::filesystem::path>(adapt_system),
        adapt_task);
    std::printf("train score: %.4f, test score: %.4f\n", summary.result.train_score,
                summary.result.test_score);
    return 0;
  }
  if (induce->parsed()) {
    const AppConfig app = load_app(induce_args);
    const auto path = cmd_induce(app, induce_count);
    std::printf("induced prompts -> %s\n", path.c_str());
    return 0;
  }
  if (similarity->parsed()) {
    const AppConfig app = load_app(similarity_args);
    std::vector<std::filesystem::path> paths(similarity_tasks.begin(), similarity_tasks.end());
    const auto path = cmd_similarity(app, paths);
    std::printf("similarity matrix -> %s\n", path.c_str());
    return 0;
  }
  if (report->parsed()) {
    const auto summary = cmd_report(report_log, report_out, normalize_timestamps);
    std::printf("report -> %s\n", summary.markdown.c_str());
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const BackendError& e) {
    std::fprintf(stderr, "backend error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
