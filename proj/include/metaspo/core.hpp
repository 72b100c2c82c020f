#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "metaspo/errors.hpp"

namespace metaspo {

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

enum class Role { System, User };

enum class Origin { Initial, Generated, Induced };

// Where a prompt came from: the loop step that produced it and its position
// within that step's generation batch. Lineage order is the deterministic
// tie-breaker for every argmax / top-k in the optimizer, so it must be unique
// within a run (see LineageCounter).
struct Lineage {
  int iteration_index = 0;
  int candidate_index = 0;
  Origin origin = Origin::Initial;

  friend bool operator==(const Lineage&, const Lineage&) = default;
  friend auto operator<=>(const Lineage& a, const Lineage& b) {
    return std::tie(a.iteration_index, a.candidate_index) <=>
           std::tie(b.iteration_index, b.candidate_index);
  }
};

struct PromptText {
  Role role = Role::User;
  std::string text;
  Lineage lineage;
};

// Hands out strictly increasing iteration indices, one per loop invocation,
// so that lineages stay unique across the whole run even when candidate
// indices restart at 0 for every generation batch.
class LineageCounter {
 public:
  int next_step() { return ++step_; }
  int current() const { return step_; }

 private:
  int step_ = 0;
};

inline constexpr const char* kDefaultSystemPromptText = "You are a helpful assistant.";
inline constexpr const char* kDefaultPlaceholder = "{question}";

PromptText default_system_prompt();

// Number of occurrences of the placeholder token in `text`.
int count_placeholder(const std::string& text, const std::string& placeholder = kDefaultPlaceholder);

// Throws MissingPlaceholder / MultiplePlaceholders when the User-role rule
// (exactly one slot) is violated; System-role prompts must contain none.
void validate_prompt(const PromptText& prompt, const std::string& placeholder = kDefaultPlaceholder);

// ---------------------------------------------------------------------------
// Chat messages and input rendering
// ---------------------------------------------------------------------------

enum class MessageRole { System, User, Assistant };

struct Message {
  MessageRole role = MessageRole::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

enum class InputMode { Separated, Unified };

// [s, u, q] -> chat messages. Separated keeps the system/user roles apart;
// Unified concatenates both into one user message joined by a single newline.
std::vector<Message> render_input(const PromptText& system_prompt, const PromptText& user_prompt,
                                  const std::string& query, InputMode mode,
                                  const std::string& placeholder = kDefaultPlaceholder);

// Literal replacement of the single placeholder occurrence; requires exactly
// one occurrence (MissingPlaceholder / MultiplePlaceholders otherwise).
std::string substitute_query(const std::string& user_text, const std::string& query,
                             const std::string& placeholder = kDefaultPlaceholder);

const char* to_string(MessageRole role);
const char* to_string(Role role);
const char* to_string(Origin origin);
const char* to_string(InputMode mode);

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

struct Example {
  std::string id;
  std::string query;
  std::string answer;
};

enum class Metric { Accuracy, BinaryF1, ExactMatch };

const char* to_string(Metric metric);
Metric metric_from_string(const std::string& name);

struct Task {
  std::string name;
  std::string domain;
  Metric metric = Metric::Accuracy;
  // Directive appended to induced user prompts, e.g. an instruction to wrap
  // the final answer in answer tags.
  std::string answer_format;
  // Label counted as the positive class under BinaryF1.
  std::string positive_label = "yes";
  std::vector<Example> train;
  std::vector<Example> test;
};

// Domains with a fixed metric convention; unknown domains may use any metric.
// Returns true when `metric` is acceptable for `domain`.
bool metric_matches_domain(const std::string& domain, Metric metric);

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class Strategy { AnalyzeGenerate, Resample, EvolutionaryCrossMutate };

const char* to_string(Strategy strategy);
Strategy strategy_from_string(const std::string& name);

struct RunConfig {
  int outer_iterations = 3;
  int sys_candidates_per_outer = 9;
  int sys_keep = 1;
  int user_candidates_per_inner = 3;
  int user_keep = 3;
  int wrong_examples_user = 3;
  int wrong_examples_system_per_task = 2;
  double base_temperature = 0.0;
  double optimizer_temperature = 1.0;
  int train_sample_size = 50;
  int test_cap = 500;
  std::uint64_t seed = 0;
  InputMode input_mode = InputMode::Separated;
  Strategy strategy = Strategy::AnalyzeGenerate;
  int concurrency_limit = 4;
  // Candidate count per generation round for the Resample / EVO strategies.
  int variant_candidates = 18;

  // Throws UsageError when an invariant is violated.
  void validate() const;
};

}  // namespace metaspo
