#pragma once

#include <string>
#include <vector>

#include "metaspo/optimizer.hpp"

namespace metaspo {

struct TaskReport {
  std::string task_name;
  std::vector<double> per_user_prompt_scores;
  double mean = 0.0;
};

struct GeneralizationReport {
  PromptText system_prompt;
  std::vector<TaskReport> per_task;
  double grand_mean = 0.0;  // mean of task means
};

// Instruction induction: n user prompts, each from 10 seeded train pairs,
// instruction body + query slot + the task's answer-format directive.
std::vector<PromptText> induce_user_prompts(const Task& task, int n, const RunConfig& cfg,
                                            const OptimizeEnv& env);

// Test set after the seeded shuffle and test_cap truncation.
std::vector<Example> capped_test_set(const Task& task, const RunConfig& cfg);

// Evaluates the system prompt on every target's capped test set under each
// induced user prompt.
GeneralizationReport unseen_generalization(const PromptText& system_prompt,
                                           const std::vector<Task>& targets,
                                           const std::vector<std::vector<PromptText>>& user_prompts,
                                           const RunConfig& cfg, const OptimizeEnv& env);

struct AdaptationResult {
  PromptText best_user;
  double train_score = 0.0;
  double test_score = 0.0;
};

// User-prompt optimization on a single target with the system prompt frozen:
// `iterations` inner-loop passes with a beam of `beam` prompts.
AdaptationResult test_time_adaptation(const PromptText& system_prompt, const Task& target,
                                      const PromptText& initial_user, const RunConfig& cfg,
                                      const OptimizeEnv& env, int iterations = 6, int beam = 3);

// Bag-of-Words task similarity: rank correlation of term-frequency ranks
// over the union vocabulary of the two tasks' example queries.
double bow_similarity(const Task& a, const Task& b);

}  // namespace metaspo
