#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "metaspo/cache.hpp"
#include "metaspo/evaluation.hpp"
#include "metaspo/events.hpp"
#include "metaspo/http_backend.hpp"
#include "metaspo/optimizer.hpp"
#include "metaspo/synthetic.hpp"

namespace metaspo {

// ---------------------------------------------------------------------------
// Task files
// ---------------------------------------------------------------------------

// Reads a task manifest (JSON) and the JSONL example files it references.
// Duplicate example ids and malformed lines are rejected with the offending
// location in the message.
Task load_task(const std::filesystem::path& manifest_path);

// Loaded alongside the task: the optional initial user prompt declared in
// the manifest.
std::optional<std::string> load_initial_user_prompt(const std::filesystem::path& manifest_path);

// Writes manifest + JSONL files under `dir`; inverse of load_task.
std::filesystem::path write_task(const Task& task, const std::filesystem::path& dir,
                                 const std::string& initial_user_prompt = "");

// Copy of `task` whose train set is a seeded uniform sample without
// replacement of min(size, |train|) examples; test set untouched.
Task sample_train(const Task& task, int size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Run log
// ---------------------------------------------------------------------------

std::string utc_timestamp();

// Line-delimited JSON event log; one writer per run, flushed per event.
class JsonlRunLog : public EventSink {
 public:
  explicit JsonlRunLog(const std::filesystem::path& path, bool truncate = true);

  void emit(const RunEvent& event) override;
  void close();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

std::vector<RunEvent> read_run_log(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BackendProfile {
  std::string kind = "synthetic";  // "synthetic" | "http"
  std::filesystem::path synthetic_spec;
  std::string base_url;
  std::string completions_path = "/chat/completions";
  std::string api_key_env = "METASPO_API_KEY";
  int timeout_ms = 60000;
  int max_attempts = 3;
  std::string base_model = "base";
  std::string optimizer_model = "optimizer";
  int base_max_tokens = 1024;
  int optimizer_max_tokens = 2048;
};

struct AppConfig {
  std::string run_id = "run";
  RunConfig cfg;
  BackendProfile backend;
  std::filesystem::path cache_dir = ".metaspo-cache";
  std::filesystem::path output_dir = "metaspo-out";
  std::vector<std::filesystem::path> source_tasks;
  std::vector<std::filesystem::path> target_tasks;

  // Relative paths in the file resolve against its directory; the
  // METASPO_BASE_URL environment variable overrides backend.base_url and the
  // API key is read from the variable named by backend.api_key_env.
  static AppConfig load(const std::filesystem::path& path);
};

// Backend assembled from a profile: the inner model access wrapped in the
// disk cache. The raw pointers expose counters for the run summary.
struct BackendHandle {
  std::shared_ptr<Backend> backend;          // the cache wrapper
  std::shared_ptr<CachingBackend> cache;     // same object, typed
  std::shared_ptr<SyntheticBackend> synthetic;  // set for synthetic profiles
};

BackendHandle make_backend(const AppConfig& app);

// ---------------------------------------------------------------------------
// Commands (bodies of the CLI subcommands)
// ---------------------------------------------------------------------------

enum class Variant { MetaSpo, OuterOnly };

struct OptimizeSummary {
  std::string system_prompt;
  double final_train_mean = 0.0;
  std::uint64_t backend_calls = 0;  // calls that reached past the cache
  std::filesystem::path run_log;
  std::filesystem::path system_prompt_path;
};

OptimizeSummary cmd_optimize(const AppConfig& app, Variant variant);

struct EvaluateSummary {
  GeneralizationReport report;
  std::filesystem::path report_json;
  std::filesystem::path report_markdown;
};

// Loads induced prompts from the output dir, inducing them first when
// `induce` is set; fails with a diagnostic naming the artifact otherwise.
EvaluateSummary cmd_evaluate(const AppConfig& app,
                             const std::optional<std::filesystem::path>& system_prompt_path,
                             bool induce);

std::filesystem::path cmd_induce(const AppConfig& app, int count);

struct AdaptSummary {
  AdaptationResult result;
  std::filesystem::path run_log;
};

AdaptSummary cmd_adapt(const AppConfig& app,
                       const std::optional<std::filesystem::path>& system_prompt_path,
                       const std::string& task_name);

// Pairwise Bag-of-Words similarity over the given task manifests (markdown +
// CSV matrix under the output dir).
std::filesystem::path cmd_similarity(const AppConfig& app,
                                     const std::vector<std::filesystem::path>& tasks);

struct ReportSummary {
  std::filesystem::path markdown;
  std::filesystem::path csv;
  std::filesystem::path plot_data;
  std::optional<std::filesystem::path> normalized_log;
};

ReportSummary cmd_report(const std::filesystem::path& log_path,
                         const std::filesystem::path& out_dir, bool normalize_timestamps);

// Loads the system prompt artifact (plain text file).
PromptText load_system_prompt(const std::filesystem::path& path);

}  // namespace metaspo
