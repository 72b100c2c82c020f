#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metaspo/backend.hpp"
#include "metaspo/core.hpp"
#include "metaspo/events.hpp"
#include "metaspo/meta_prompts.hpp"
#include "metaspo/metrics.hpp"

namespace metaspo {

// ---------------------------------------------------------------------------
// Candidate pools and selection
// ---------------------------------------------------------------------------

struct Candidate {
  PromptText prompt;
  std::optional<double> score;
};

// Ordered list of scored prompt candidates. Kept in lineage order between
// selection steps so that every tie-break is deterministic.
struct CandidatePool {
  std::vector<Candidate> candidates;

  bool empty() const { return candidates.empty(); }
  std::size_t size() const { return candidates.size(); }
  void sort_by_lineage();
};

// Argmax by score; ties broken by earliest lineage.
const PromptText& select_best(const CandidatePool& pool);

// The k highest-scoring candidates (all when the pool is smaller), ordered
// by descending score then lineage. Equivalent to maximizing the mean score
// over all size-k subsets.
CandidatePool select_top_k(const CandidatePool& pool, int k);

// ---------------------------------------------------------------------------
// Optimization state and environment
// ---------------------------------------------------------------------------

struct TaskState {
  Task task;                  // train already holds the seeded sample
  CandidatePool user_pool;    // lineage-ordered, size <= user_keep after a loop
  PromptText best_user;       // member of user_pool
};

struct OuterState {
  PromptText system;
  std::vector<TaskState> task_states;
  int iteration = 0;
};

// Wiring shared by the loops: one backend serves both the base model (scoring)
// and the optimizer model (analysis + candidate generation).
struct OptimizeEnv {
  Backend& backend;
  EventSink& log;
  std::string run_id;
  std::string base_model = "base";
  std::string optimizer_model = "optimizer";
  int base_max_tokens = 1024;
  int optimizer_max_tokens = 2048;
};

// ---------------------------------------------------------------------------
// Loop building blocks
// ---------------------------------------------------------------------------

EvalOptions eval_options_for(const Task& task, const RunConfig& cfg, const OptimizeEnv& env);

// One optimizer-model draw at cfg.optimizer_temperature; sample_index keeps
// repeated draws from the same messages in distinct cache slots.
std::string sample_optimizer_text(const OptimizeEnv& env, const RunConfig& cfg,
                                  const std::vector<Message>& messages, int sample_index);

void emit_event(const OptimizeEnv& env, EventKind kind, nlohmann::ordered_json payload);

// Evaluates (s, u) on the task's train sample and returns the incorrect
// records as wrong examples: n of them sampled uniformly without replacement
// by `seed` (all when fewer exist). Empty when the prompt is perfect.
std::vector<WrongExample> collect_wrong(const PromptText& system_prompt,
                                        const PromptText& user_prompt, const Task& task, int n,
                                        Backend& backend, const EvalOptions& opts,
                                        std::uint64_t seed);

// Candidate generation shared by both loops. AnalyzeGenerate runs `count`
// rounds of the two-step analysis + generation pipeline, re-collecting wrong
// examples each round through `wrongs_for_round`; Resample and EVO emit one
// batch of `count` analysis-free candidates (wrongs unused).
struct GenerationContext {
  const CandidatePool* pool = nullptr;      // parents (EVO)
  PromptText current;                       // prompt being improved
  const PromptText* system = nullptr;       // fixed system prompt (user-role rounds)
  std::function<std::vector<WrongExample>(int round)> wrongs_for_round;
  int count = 18;
  int iteration_index = 0;                  // lineage step for new candidates
  std::string scope = "inner";              // "inner" | "outer", for the log
  std::string task;                         // empty in outer scope
};

std::vector<PromptText> generate_candidates(Strategy strategy, const GenerationContext& context,
                                            const RunConfig& cfg, const OptimizeEnv& env);

// One user-prompt refinement pass for a single task with the system prompt
// held fixed.
TaskState inner_loop(const PromptText& system_prompt, TaskState state, const RunConfig& cfg,
                     const OptimizeEnv& env, int outer_iteration, LineageCounter& steps);

// One system-prompt refinement pass across all tasks and their user pools.
OuterState outer_loop(OuterState state, const RunConfig& cfg, const OptimizeEnv& env,
                      LineageCounter& steps);

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

struct OptimizeResult {
  PromptText system;
  std::vector<TaskState> task_states;
  // Mean over tasks of the train score of (system, best_user).
  double final_train_mean = 0.0;
};

// Alternates the inner and outer loops for cfg.outer_iterations rounds.
// Tasks must already carry their train sample; initial_user supplies each
// task's starting user prompt.
OptimizeResult run_metaspo(const std::vector<Task>& tasks,
                           const std::vector<PromptText>& initial_user_prompts,
                           const PromptText& initial_system, const RunConfig& cfg,
                           const OptimizeEnv& env);

// Outer-loop-only variant: 2 x cfg.outer_iterations rounds with the user
// pools frozen at their initial prompts.
OptimizeResult run_outer_only(const std::vector<Task>& tasks,
                              const std::vector<PromptText>& initial_user_prompts,
                              const PromptText& initial_system, const RunConfig& cfg,
                              const OptimizeEnv& env);

// Default user prompt when a task manifest does not declare one.
PromptText default_initial_user_prompt(const Task& task, int candidate_index);

}  // namespace metaspo
