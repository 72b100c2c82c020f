#include "metaspo/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "metaspo/rng.hpp"

namespace metaspo {

std::vector<PromptText> induce_user_prompts(const Task& task, int n, const RunConfig& cfg,
                                            const OptimizeEnv& env) {
  constexpr int kPairsPerPrompt = 10;
  if (n < 1) throw UsageError("induce_user_prompts: n must be >= 1");
  if (task.train.size() < kPairsPerPrompt)
    throw InsufficientExamples("induction needs at least 10 train examples, task " + task.name +
                               " has " + std::to_string(task.train.size()));

  std::vector<PromptText> prompts;
  prompts.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, "induce." + task.name, static_cast<std::uint64_t>(i)));
    const auto picks = rng.sample_indices(task.train.size(), kPairsPerPrompt);
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(picks.size());
    for (const std::size_t index : picks)
      pairs.emplace_back(task.train[index].query, task.train[index].answer);

    const auto messages = render_induction(pairs);
    std::string instruction;
    try {
      instruction = parse_tagged(sample_optimizer_text(env, cfg, messages, i), kInstructionTag);
    } catch (const TagNotFound&) {
      // one fresh draw before giving up
      instruction =
          parse_tagged(sample_optimizer_text(env, cfg, messages, n + i), kInstructionTag);
    }

    std::string text = instruction;
    if (count_placeholder(text) == 0) text += "\n\n<Question>{question}</Question>";
    if (!task.answer_format.empty()) text += "\n\n" + task.answer_format;

    PromptText prompt{Role::User, std::move(text), Lineage{0, i, Origin::Induced}};
    validate_prompt(prompt);
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

std::vector<Example> capped_test_set(const Task& task, const RunConfig& cfg) {
  std::vector<Example> test = task.test;
  Rng rng(derive_seed(cfg.seed, "testcap." + task.name));
  rng.shuffle(test);
  if (test.size() > static_cast<std::size_t>(cfg.test_cap)) test.resize(cfg.test_cap);
  return test;
}

GeneralizationReport unseen_generalization(
    const PromptText& system_prompt, const std::vector<Task>& targets,
    const std::vector<std::vector<PromptText>>& user_prompts, const RunConfig& cfg,
    const OptimizeEnv& env) {
  if (targets.empty()) throw UsageError("unseen_generalization: no target tasks");
  if (targets.size() != user_prompts.size())
    throw UsageError("unseen_generalization: one prompt set per target is required");

  GeneralizationReport report;
  report.system_prompt = system_prompt;
  double task_mean_sum = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Task& task = targets[t];
    if (task.test.empty()) throw DataError("target task " + task.name + " has an empty test set");
    if (user_prompts[t].empty())
      throw DataError("target task " + task.name + " has no induced user prompts");

    const std::vector<Example> test = capped_test_set(task, cfg);
    EvalOptions opts = eval_options_for(task, cfg, env);

    TaskReport task_report;
    task_report.task_name = task.name;
    double sum = 0.0;
    for (const auto& user_prompt : user_prompts[t]) {
      const double score =
          evaluate_prompt(system_prompt, user_prompt, test, env.backend, opts).mean_score;
      task_report.per_user_prompt_scores.push_back(score);
      sum += score;
      emit_event(env, EventKind::EvalComplete,
                 {{"task", task.name},
                  {"user_prompt", user_prompt.lineage.candidate_index},
                  {"score", score},
                  {"examples", test.size()}});
    }
    task_report.mean = sum / static_cast<double>(task_report.per_user_prompt_scores.size());
    task_mean_sum += task_report.mean;
    report.per_task.push_back(std::move(task_report));
  }
  report.grand_mean = task_mean_sum / static_cast<double>(report.per_task.size());
  return report;
}

AdaptationResult test_time_adaptation(const PromptText& system_prompt, const Task& target,
                                      const PromptText& initial_user, const RunConfig& cfg,
                                      const OptimizeEnv& env, int iterations, int beam) {
  if (target.train.empty()) throw DataError("adaptation target has no train examples");
  if (iterations < 1 || beam < 1) throw UsageError("adaptation needs iterations >= 1, beam >= 1");

  RunConfig adapted = cfg;
  adapted.user_keep = beam;

  TaskState state;
  state.task = target;
  state.user_pool.candidates.push_back(Candidate{initial_user, std::nullopt});
  state.best_user = initial_user;

  LineageCounter steps;
  for (int iteration = 1; iteration <= iterations; ++iteration)
    state = inner_loop(system_prompt, std::move(state), adapted, env, iteration, steps);

  AdaptationResult result;
  result.best_user = state.best_user;
  for (const auto& candidate : state.user_pool.candidates)
    if (candidate.prompt.lineage == state.best_user.lineage)
      result.train_score = candidate.score.value_or(0.0);

  const std::vector<Example> test = capped_test_set(target, cfg);
  if (!test.empty()) {
    const EvalOptions opts = eval_options_for(target, cfg, env);
    result.test_score =
        evaluate_prompt(system_prompt, result.best_user, test, env.backend, opts).mean_score;
  }
  return result;
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::map<std::string, double> term_frequencies(const Task& task) {
  std::map<std::string, double> freq;
  for (const auto& example : task.train)
    for (auto& token : tokenize(example.query)) freq[token] += 1.0;
  for (const auto& example : task.test)
    for (auto& token : tokenize(example.query)) freq[token] += 1.0;
  return freq;
}

// Average ranks (1-based) with ties sharing their mean position.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double bow_similarity(const Task& a, const Task& b) {
  if ((a.train.empty() && a.test.empty()) || (b.train.empty() && b.test.empty()))
    throw DataError("bow_similarity: both tasks need at least one example");

  const auto freq_a = term_frequencies(a);
  const auto freq_b = term_frequencies(b);

  std::map<std::string, std::pair<double, double>> joint;
  for (const auto& [term, count] : freq_a) joint[term].first = count;
  for (const auto& [term, count] : freq_b) joint[term].second = count;
  if (joint.empty()) throw EmptyVocabulary("bow_similarity: union vocabulary is empty");

  std::vector<double> counts_a, counts_b;
  counts_a.reserve(joint.size());
  counts_b.reserve(joint.size());
  for (const auto& [term, counts] : joint) {
    counts_a.push_back(counts.first);
    counts_b.push_back(counts.second);
  }

  const std::vector<double> ranks_a = average_ranks(counts_a);
  const std::vector<double> ranks_b = average_ranks(counts_b);

  const std::size_t n = ranks_a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += ranks_a[i];
    mean_b += ranks_b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);

  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ranks_a[i] - mean_a;
    const double db = ranks_b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return ranks_a == ranks_b ? 1.0 : 0.0;
  return cov / std::sqrt(var_a * var_b);
}

}  // namespace metaspo
