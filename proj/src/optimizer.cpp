#include "metaspo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metaspo/rng.hpp"

namespace metaspo {

namespace {

nlohmann::ordered_json lineage_json(const Lineage& lineage) {
  return {{"iteration", lineage.iteration_index},
          {"candidate", lineage.candidate_index},
          {"origin", to_string(lineage.origin)}};
}

void emit(const OptimizeEnv& env, EventKind kind, nlohmann::ordered_json payload) {
  emit_event(env, kind, std::move(payload));
}

// Parse-or-resample-once: the optimizer occasionally drops the output tags,
// so a malformed draw gets one fresh sample before the slot is given up.
std::optional<std::string> parse_with_retry(const OptimizeEnv& env, const RunConfig& cfg,
                                            const std::vector<Message>& messages,
                                            const std::string& tag, int sample_index,
                                            int retry_sample_index) {
  try {
    return parse_tagged(sample_optimizer_text(env, cfg, messages, sample_index), tag);
  } catch (const TagNotFound&) {
  }
  try {
    return parse_tagged(sample_optimizer_text(env, cfg, messages, retry_sample_index), tag);
  } catch (const TagNotFound&) {
    return std::nullopt;
  }
}

bool placeholder_valid(Role role, const std::string& text) {
  const int n = count_placeholder(text);
  return role == Role::User ? n == 1 : n == 0;
}

double score_of(const Candidate& candidate) {
  return candidate.score.value_or(-std::numeric_limits<double>::infinity());
}

nlohmann::ordered_json pool_entries_json(const CandidatePool& pool) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& candidate : pool.candidates)
    entries.push_back({{"lineage", lineage_json(candidate.prompt.lineage)},
                       {"score", candidate.score ? nlohmann::ordered_json(*candidate.score)
                                                 : nlohmann::ordered_json(nullptr)}});
  return entries;
}

}  // namespace

void emit_event(const OptimizeEnv& env, EventKind kind, nlohmann::ordered_json payload) {
  RunEvent event;
  event.run_id = env.run_id;
  event.kind = kind;
  event.payload = std::move(payload);
  env.log.emit(event);
}

std::string sample_optimizer_text(const OptimizeEnv& env, const RunConfig& cfg,
                                  const std::vector<Message>& messages, int sample_index) {
  ChatRequest request;
  request.model = env.optimizer_model;
  request.messages = messages;
  request.temperature = cfg.optimizer_temperature;
  request.max_tokens = env.optimizer_max_tokens;
  request.sample_index = sample_index;
  return env.backend.complete(request).content;
}

void CandidatePool::sort_by_lineage() {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.prompt.lineage < b.prompt.lineage;
                   });
}

const PromptText& select_best(const CandidatePool& pool) {
  if (pool.empty()) throw EmptyPool("select_best: empty candidate pool");
  const Candidate* best = &pool.candidates.front();
  for (const auto& candidate : pool.candidates) {
    if (score_of(candidate) > score_of(*best) ||
        (score_of(candidate) == score_of(*best) &&
         candidate.prompt.lineage < best->prompt.lineage)) {
      best = &candidate;
    }
  }
  return best->prompt;
}

CandidatePool select_top_k(const CandidatePool& pool, int k) {
  if (pool.empty()) throw EmptyPool("select_top_k: empty candidate pool");
  if (k < 1) throw UsageError("select_top_k: k must be >= 1");
  CandidatePool sorted = pool;
  std::stable_sort(sorted.candidates.begin(), sorted.candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (score_of(a) != score_of(b)) return score_of(a) > score_of(b);
                     return a.prompt.lineage < b.prompt.lineage;
                   });
  if (static_cast<std::size_t>(k) < sorted.candidates.size()) sorted.candidates.resize(k);
  return sorted;
}

EvalOptions eval_options_for(const Task& task, const RunConfig& cfg, const OptimizeEnv& env) {
  EvalOptions opts;
  opts.metric = task.metric;
  opts.positive_label = task.positive_label;
  opts.mode = cfg.input_mode;
  opts.model = env.base_model;
  opts.temperature = cfg.base_temperature;
  opts.max_tokens = env.base_max_tokens;
  opts.concurrency = cfg.concurrency_limit;
  return opts;
}

std::vector<WrongExample> collect_wrong(const PromptText& system_prompt,
                                        const PromptText& user_prompt, const Task& task, int n,
                                        Backend& backend, const EvalOptions& opts,
                                        std::uint64_t seed) {
  if (n < 1) throw UsageError("collect_wrong: n must be >= 1");
  const EvalResult result = evaluate_prompt(system_prompt, user_prompt, task.train, backend, opts);

  std::vector<const EvalRecord*> incorrect;
  for (const auto& record : result.records)
    if (!record.correct) incorrect.push_back(&record);

  Rng rng(seed);
  const auto picks = rng.sample_indices(incorrect.size(), static_cast<std::size_t>(n));

  std::vector<WrongExample> wrongs;
  wrongs.reserve(picks.size());
  for (const std::size_t index : picks) {
    const EvalRecord& record = *incorrect[index];
    wrongs.push_back(WrongExample{record.system_text, record.user_text, record.raw_response,
                                  record.prediction, record.gold});
  }
  return wrongs;
}

namespace {

// Scores every pool member on the task's train sample with `system` fixed.
void score_pool_on_task(CandidatePool& pool, const PromptText& system, const Task& task,
                        const RunConfig& cfg, const OptimizeEnv& env) {
  const EvalOptions opts = eval_options_for(task, cfg, env);
  for (auto& candidate : pool.candidates) {
    candidate.score =
        evaluate_prompt(system, candidate.prompt, task.train, env.backend, opts).mean_score;
  }
}

// Mean over tasks of the mean over each task's user pool of train scores.
double score_system_across_tasks(const PromptText& system, const std::vector<TaskState>& states,
                                 const RunConfig& cfg, const OptimizeEnv& env) {
  double task_sum = 0.0;
  for (const auto& state : states) {
    const EvalOptions opts = eval_options_for(state.task, cfg, env);
    double pool_sum = 0.0;
    for (const auto& candidate : state.user_pool.candidates) {
      pool_sum +=
          evaluate_prompt(system, candidate.prompt, state.task.train, env.backend, opts).mean_score;
    }
    task_sum += pool_sum / static_cast<double>(state.user_pool.size());
  }
  return task_sum / static_cast<double>(states.size());
}

}  // namespace

std::vector<PromptText> generate_candidates(Strategy strategy, const GenerationContext& context,
                                            const RunConfig& cfg, const OptimizeEnv& env) {
  const Role role = context.current.role;
  std::vector<PromptText> accepted;
  int candidate_index = 0;

  auto log_candidate = [&](const PromptText& prompt, int round) {
    emit(env, EventKind::CandidateGenerated,
         {{"scope", context.scope},
          {"task", context.task},
          {"step", context.iteration_index},
          {"round", round},
          {"lineage", lineage_json(prompt.lineage)},
          {"role", to_string(prompt.role)},
          {"text", prompt.text}});
  };
  auto log_discarded = [&](int round, const std::string& reason) {
    emit(env, EventKind::CandidateDiscarded,
         {{"scope", context.scope},
          {"task", context.task},
          {"step", context.iteration_index},
          {"round", round},
          {"reason", reason}});
  };
  auto accept = [&](std::optional<std::string> text, int round) {
    if (!text) {
      log_discarded(round, "tag_not_found");
      return;
    }
    if (!placeholder_valid(role, *text)) {
      log_discarded(round, role == Role::User ? "placeholder_invalid" : "placeholder_in_system");
      return;
    }
    PromptText prompt{role, *text,
                      Lineage{context.iteration_index, candidate_index++, Origin::Generated}};
    log_candidate(prompt, round);
    accepted.push_back(std::move(prompt));
  };

  switch (strategy) {
    case Strategy::AnalyzeGenerate: {
      const char* analysis_tag = kAnalysisTag;
      const char* output_tag =
          role == Role::User ? kImprovedUserPromptTag : kImprovedSystemPromptTag;
      for (int round = 0; round < context.count; ++round) {
        const auto wrongs = context.wrongs_for_round(round);
        if (wrongs.empty()) break;  // nothing left to analyze
        const auto analysis_messages =
            role == Role::User
                ? render_user_analysis(context.system ? *context.system : context.current,
                                       context.current, wrongs)
                : render_system_analysis(context.current, wrongs);
        const auto analysis = parse_with_retry(env, cfg, analysis_messages, analysis_tag, round,
                                               context.count + round);
        if (!analysis) {
          log_discarded(round, "analysis_tag_not_found");
          continue;
        }
        const auto generation_messages =
            role == Role::User
                ? render_user_generation(context.system ? *context.system : context.current,
                                         context.current, wrongs, *analysis)
                : render_system_generation(context.current, *analysis);
        accept(parse_with_retry(env, cfg, generation_messages, output_tag, round,
                                context.count + round),
               round);
      }
      break;
    }
    case Strategy::Resample: {
      for (int i = 0; i < context.count; ++i) {
        accept(parse_with_retry(env, cfg, render_resample(context.current), kImprovedPromptTag, i,
                                context.count + i),
               0);
      }
      break;
    }
    case Strategy::EvolutionaryCrossMutate: {
      // Crossover and mutation alternate; with fewer than two parents only
      // mutation applies.
      const bool can_cross = context.pool != nullptr && context.pool->size() >= 2;
      PromptText parent_a = context.current;
      PromptText parent_b;
      if (can_cross) {
        const CandidatePool parents = select_top_k(*context.pool, 2);
        parent_a = parents.candidates[0].prompt;
        parent_b = parents.candidates[1].prompt;
      }
      for (int i = 0; i < context.count; ++i) {
        const bool crossover = can_cross && i % 2 == 0;
        const auto messages = crossover ? render_crossover(parent_a, parent_b)
                                        : render_mutation(context.current);
        accept(parse_with_retry(env, cfg, messages, kImprovedPromptTag, i, context.count + i), 0);
      }
      break;
    }
  }
  return accepted;
}

TaskState inner_loop(const PromptText& system_prompt, TaskState state, const RunConfig& cfg,
                     const OptimizeEnv& env, int outer_iteration, LineageCounter& steps) {
  if (state.user_pool.empty()) throw EmptyPool("inner_loop: task has an empty user pool");
  const std::string& task_name = state.task.name;
  emit(env, EventKind::InnerStart, {{"task", task_name}, {"iteration", outer_iteration}});

  const int step = steps.next_step();
  const EvalOptions opts = eval_options_for(state.task, cfg, env);

  // Select the best-performing user prompt as the generation anchor.
  score_pool_on_task(state.user_pool, system_prompt, state.task, cfg, env);
  const PromptText anchor = select_best(state.user_pool);
  double anchor_score = 0.0;
  for (const auto& candidate : state.user_pool.candidates)
    if (candidate.prompt.lineage == anchor.lineage) anchor_score = *candidate.score;

  const bool anchor_perfect =
      collect_wrong(system_prompt, anchor, state.task, 1, env.backend, opts,
                    derive_seed(cfg.seed, "wrong.user.probe." + task_name, outer_iteration, 0))
          .empty();

  if (!anchor_perfect) {
    GenerationContext context;
    context.pool = &state.user_pool;
    context.current = anchor;
    context.system = &system_prompt;
    context.count = cfg.strategy == Strategy::AnalyzeGenerate ? cfg.user_candidates_per_inner
                                                              : cfg.variant_candidates;
    context.iteration_index = step;
    context.scope = "inner";
    context.task = task_name;
    context.wrongs_for_round = [&](int round) {
      return collect_wrong(system_prompt, anchor, state.task, cfg.wrong_examples_user, env.backend,
                           opts,
                           derive_seed(cfg.seed, "wrong.user." + task_name, outer_iteration, round));
    };
    for (auto& prompt : generate_candidates(cfg.strategy, context, cfg, env))
      state.user_pool.candidates.push_back(Candidate{std::move(prompt), std::nullopt});
  }

  // Score everything (previous prompts included) and keep the top user_keep.
  score_pool_on_task(state.user_pool, system_prompt, state.task, cfg, env);
  emit(env, EventKind::PoolScored,
       {{"scope", "inner"},
        {"task", task_name},
        {"iteration", outer_iteration},
        {"entries", pool_entries_json(state.user_pool)}});

  CandidatePool kept = select_top_k(state.user_pool, cfg.user_keep);
  state.best_user = kept.candidates.front().prompt;
  const double best_score = *kept.candidates.front().score;
  kept.sort_by_lineage();
  state.user_pool = std::move(kept);

  emit(env, EventKind::Selection,
       {{"scope", "inner"},
        {"task", task_name},
        {"iteration", outer_iteration},
        {"chosen", lineage_json(state.best_user.lineage)},
        {"chosen_score", best_score},
        {"incumbent", lineage_json(anchor.lineage)},
        {"incumbent_score", anchor_score}});
  emit(env, EventKind::InnerEnd,
       {{"task", task_name}, {"iteration", outer_iteration}, {"best_score", best_score}});
  return state;
}

OuterState outer_loop(OuterState state, const RunConfig& cfg, const OptimizeEnv& env,
                      LineageCounter& steps) {
  for (const auto& task_state : state.task_states)
    if (task_state.user_pool.empty()) throw EmptyPool("outer_loop: empty user pool");

  const int iteration = state.iteration + 1;
  emit(env, EventKind::OuterStart, {{"iteration", iteration}});

  const int step = steps.next_step();
  const PromptText incumbent = state.system;

  CandidatePool system_pool;
  system_pool.candidates.push_back(Candidate{incumbent, std::nullopt});

  if (cfg.strategy == Strategy::AnalyzeGenerate) {
    for (int round = 0; round < cfg.sys_candidates_per_outer; ++round) {
      // Aggregate wrong examples across tasks, each under its best user prompt.
      std::vector<WrongExample> wrongs;
      for (auto& task_state : state.task_states) {
        score_pool_on_task(task_state.user_pool, incumbent, task_state.task, cfg, env);
        const PromptText best_user = select_best(task_state.user_pool);
        const EvalOptions opts = eval_options_for(task_state.task, cfg, env);
        auto task_wrongs =
            collect_wrong(incumbent, best_user, task_state.task,
                          cfg.wrong_examples_system_per_task, env.backend, opts,
                          derive_seed(cfg.seed, "wrong.system." + task_state.task.name,
                                      static_cast<std::uint64_t>(iteration), round));
        wrongs.insert(wrongs.end(), task_wrongs.begin(), task_wrongs.end());
      }
      if (wrongs.empty()) break;  // every task is perfect; keep the incumbent

      const auto analysis_messages = render_system_analysis(incumbent, wrongs);
      const auto analysis = parse_with_retry(env, cfg, analysis_messages, kAnalysisTag, round,
                                             cfg.sys_candidates_per_outer + round);
      if (!analysis) {
        emit(env, EventKind::CandidateDiscarded,
             {{"scope", "outer"},
              {"task", ""},
              {"step", step},
              {"round", round},
              {"reason", "analysis_tag_not_found"}});
        continue;
      }
      const auto generation_messages = render_system_generation(incumbent, *analysis);
      const auto text = parse_with_retry(env, cfg, generation_messages, kImprovedSystemPromptTag,
                                         round, cfg.sys_candidates_per_outer + round);
      if (!text || count_placeholder(*text) != 0) {
        emit(env, EventKind::CandidateDiscarded,
             {{"scope", "outer"},
              {"task", ""},
              {"step", step},
              {"round", round},
              {"reason", text ? "placeholder_in_system" : "tag_not_found"}});
        continue;
      }
      PromptText prompt{Role::System, *text,
                        Lineage{step, static_cast<int>(system_pool.size()) - 1, Origin::Generated}};
      emit(env, EventKind::CandidateGenerated,
           {{"scope", "outer"},
            {"task", ""},
            {"step", step},
            {"round", round},
            {"lineage", lineage_json(prompt.lineage)},
            {"role", "system"},
            {"text", prompt.text}});
      system_pool.candidates.push_back(Candidate{std::move(prompt), std::nullopt});
    }
  } else {
    GenerationContext context;
    context.pool = &system_pool;
    context.current = incumbent;
    context.count = cfg.variant_candidates;
    context.iteration_index = step;
    context.scope = "outer";
    context.wrongs_for_round = [](int) { return std::vector<WrongExample>{}; };
    for (auto& prompt : generate_candidates(cfg.strategy, context, cfg, env))
      system_pool.candidates.push_back(Candidate{std::move(prompt), std::nullopt});
  }

  // Evaluate across tasks and user prompts.
  for (auto& candidate : system_pool.candidates)
    candidate.score = score_system_across_tasks(candidate.prompt, state.task_states, cfg, env);

  emit(env, EventKind::PoolScored,
       {{"scope", "outer"}, {"iteration", iteration}, {"entries", pool_entries_json(system_pool)}});

  const PromptText chosen = select_best(system_pool);
  double chosen_score = 0.0;
  double incumbent_score = 0.0;
  for (const auto& candidate : system_pool.candidates) {
    if (candidate.prompt.lineage == chosen.lineage) chosen_score = *candidate.score;
    if (candidate.prompt.lineage == incumbent.lineage) incumbent_score = *candidate.score;
  }
  emit(env, EventKind::Selection,
       {{"scope", "outer"},
        {"iteration", iteration},
        {"chosen", lineage_json(chosen.lineage)},
        {"chosen_score", chosen_score},
        {"incumbent", lineage_json(incumbent.lineage)},
        {"incumbent_score", incumbent_score}});
  emit(env, EventKind::OuterEnd, {{"iteration", iteration}, {"best_score", chosen_score}});

  state.system = chosen;
  state.iteration = iteration;
  return state;
}

PromptText default_initial_user_prompt(const Task& task, int candidate_index) {
  std::string text = "Answer the following question.\n\n<Question>{question}</Question>";
  if (!task.answer_format.empty()) text += "\n\n" + task.answer_format;
  return PromptText{Role::User, std::move(text), Lineage{0, candidate_index, Origin::Initial}};
}

namespace {

OuterState initial_state(const std::vector<Task>& tasks,
                         const std::vector<PromptText>& initial_user_prompts,
                         const PromptText& initial_system) {
  if (tasks.empty()) throw UsageError("at least one source task is required");
  if (tasks.size() != initial_user_prompts.size())
    throw UsageError("one initial user prompt per task is required");
  OuterState state;
  state.system = initial_system;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].train.empty())
      throw DataError("task " + tasks[i].name + " has no train examples after sampling");
    validate_prompt(initial_user_prompts[i]);
    TaskState task_state;
    task_state.task = tasks[i];
    task_state.user_pool.candidates.push_back(Candidate{initial_user_prompts[i], std::nullopt});
    task_state.best_user = initial_user_prompts[i];
    state.task_states.push_back(std::move(task_state));
  }
  return state;
}

double final_train_mean(const OuterState& state, const RunConfig& cfg, const OptimizeEnv& env) {
  double sum = 0.0;
  for (const auto& task_state : state.task_states) {
    const EvalOptions opts = eval_options_for(task_state.task, cfg, env);
    sum += evaluate_prompt(state.system, task_state.best_user, task_state.task.train, env.backend,
                           opts)
               .mean_score;
  }
  return sum / static_cast<double>(state.task_states.size());
}

OptimizeResult to_result(OuterState state, const RunConfig& cfg, const OptimizeEnv& env) {
  OptimizeResult result;
  result.final_train_mean = final_train_mean(state, cfg, env);
  result.system = std::move(state.system);
  result.task_states = std::move(state.task_states);
  return result;
}

}  // namespace

OptimizeResult run_metaspo(const std::vector<Task>& tasks,
                           const std::vector<PromptText>& initial_user_prompts,
                           const PromptText& initial_system, const RunConfig& cfg,
                           const OptimizeEnv& env) {
  cfg.validate();
  OuterState state = initial_state(tasks, initial_user_prompts, initial_system);
  LineageCounter steps;
  for (int iteration = 1; iteration <= cfg.outer_iterations; ++iteration) {
    for (auto& task_state : state.task_states)
      task_state = inner_loop(state.system, std::move(task_state), cfg, env, iteration, steps);
    state = outer_loop(std::move(state), cfg, env, steps);
  }
  return to_result(std::move(state), cfg, env);
}

OptimizeResult run_outer_only(const std::vector<Task>& tasks,
                              const std::vector<PromptText>& initial_user_prompts,
                              const PromptText& initial_system, const RunConfig& cfg,
                              const OptimizeEnv& env) {
  cfg.validate();
  OuterState state = initial_state(tasks, initial_user_prompts, initial_system);
  LineageCounter steps;
  const int rounds = 2 * cfg.outer_iterations;
  for (int iteration = 1; iteration <= rounds; ++iteration)
    state = outer_loop(std::move(state), cfg, env, steps);
  return to_result(std::move(state), cfg, env);
}

}  // namespace metaspo
