#include "metaspo/core.hpp"

#include <algorithm>
#include <cctype>

namespace metaspo {

PromptText default_system_prompt() {
  return PromptText{Role::System, kDefaultSystemPromptText, Lineage{0, 0, Origin::Initial}};
}

int count_placeholder(const std::string& text, const std::string& placeholder) {
  if (placeholder.empty()) return 0;
  int count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    ++count;
    pos += placeholder.size();
  }
  return count;
}

void validate_prompt(const PromptText& prompt, const std::string& placeholder) {
  const int n = count_placeholder(prompt.text, placeholder);
  if (prompt.role == Role::User) {
    if (n == 0) throw MissingPlaceholder("user prompt lacks the query placeholder " + placeholder);
    if (n > 1) throw MultiplePlaceholders("user prompt contains the query placeholder more than once");
  } else {
    if (n > 0) throw DataError("system prompt must not contain the query placeholder");
  }
}

std::string substitute_query(const std::string& user_text, const std::string& query,
                             const std::string& placeholder) {
  const int n = count_placeholder(user_text, placeholder);
  if (n == 0) throw MissingPlaceholder("user prompt lacks the query placeholder " + placeholder);
  if (n > 1) throw MultiplePlaceholders("user prompt contains the query placeholder more than once");
  const std::size_t pos = user_text.find(placeholder);
  std::string out = user_text;
  out.replace(pos, placeholder.size(), query);
  return out;
}

std::vector<Message> render_input(const PromptText& system_prompt, const PromptText& user_prompt,
                                  const std::string& query, InputMode mode,
                                  const std::string& placeholder) {
  const std::string substituted = substitute_query(user_prompt.text, query, placeholder);
  if (mode == InputMode::Separated) {
    return {Message{MessageRole::System, system_prompt.text},
            Message{MessageRole::User, substituted}};
  }
  return {Message{MessageRole::User, system_prompt.text + "\n" + substituted}};
}

const char* to_string(MessageRole role) {
  switch (role) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

const char* to_string(Role role) { return role == Role::System ? "system" : "user"; }

const char* to_string(Origin origin) {
  switch (origin) {
    case Origin::Initial: return "initial";
    case Origin::Generated: return "generated";
    case Origin::Induced: return "induced";
  }
  return "initial";
}

const char* to_string(InputMode mode) {
  return mode == InputMode::Separated ? "separated" : "unified";
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::Accuracy: return "accuracy";
    case Metric::BinaryF1: return "binary_f1";
    case Metric::ExactMatch: return "exact_match";
  }
  return "accuracy";
}

Metric metric_from_string(const std::string& name) {
  if (name == "accuracy") return Metric::Accuracy;
  if (name == "binary_f1" || name == "f1") return Metric::BinaryF1;
  if (name == "exact_match" || name == "em") return Metric::ExactMatch;
  throw ParseError("unknown metric: " + name);
}

const char* to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::AnalyzeGenerate: return "analyze-generate";
    case Strategy::Resample: return "resample";
    case Strategy::EvolutionaryCrossMutate: return "evo";
  }
  return "analyze-generate";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "analyze-generate") return Strategy::AnalyzeGenerate;
  if (name == "resample") return Strategy::Resample;
  if (name == "evo") return Strategy::EvolutionaryCrossMutate;
  throw UsageError("unknown strategy: " + name);
}

bool metric_matches_domain(const std::string& domain, Metric metric) {
  std::string d;
  d.reserve(domain.size());
  for (char c : domain) d.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (d == "medical" || d == "review" || d == "review analysis" || d == "reasoning")
    return metric == Metric::Accuracy;
  if (d == "safety") return metric == Metric::BinaryF1;
  if (d == "grounding") return metric == Metric::ExactMatch;
  return true;
}

void RunConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw UsageError(std::string(name) + " must be >= 1");
  };
  positive(outer_iterations, "outer_iterations");
  positive(sys_candidates_per_outer, "sys_candidates_per_outer");
  positive(sys_keep, "sys_keep");
  positive(user_candidates_per_inner, "user_candidates_per_inner");
  positive(user_keep, "user_keep");
  positive(wrong_examples_user, "wrong_examples_user");
  positive(wrong_examples_system_per_task, "wrong_examples_system_per_task");
  positive(train_sample_size, "train_sample_size");
  positive(test_cap, "test_cap");
  positive(concurrency_limit, "concurrency_limit");
  positive(variant_candidates, "variant_candidates");
  if (base_temperature < 0 || optimizer_temperature < 0)
    throw UsageError("temperatures must be >= 0");
  if (sys_keep > sys_candidates_per_outer + 1)
    throw UsageError("sys_keep must be <= sys_candidates_per_outer + 1");
  // user_keep is bounded by the pool the inner loop ever sees: the initial
  // prompt plus one candidate per generation round.
  if (user_keep > user_candidates_per_inner + 1 && strategy == Strategy::AnalyzeGenerate)
    throw UsageError("user_keep must be <= user_candidates_per_inner + 1");
}

}  // namespace metaspo
