#pragma once

#include <string>
#include <vector>

#include "metaspo/core.hpp"

namespace metaspo {

// One incorrectly answered example, rendered into the <Example> block that
// the analysis meta prompts consume.
struct WrongExample {
  std::string system_prompt;
  std::string user_prompt;
  std::string response;
  std::string prediction;
  std::string label;
};

std::string render_wrong_example(const WrongExample& wrong);

// Blocks joined by a single blank line, in input order.
std::string render_wrong_examples(const std::vector<WrongExample>& wrongs);

// Failure analysis of the current user prompt.
std::vector<Message> render_user_analysis(const PromptText& system_prompt,
                                          const PromptText& user_prompt,
                                          const std::vector<WrongExample>& wrongs);

// Candidate user prompt from the analysis.
std::vector<Message> render_user_generation(const PromptText& system_prompt,
                                            const PromptText& user_prompt,
                                            const std::vector<WrongExample>& wrongs,
                                            const std::string& analysis);

// Failure analysis of the current system prompt over task-aggregated wrongs.
std::vector<Message> render_system_analysis(const PromptText& system_prompt,
                                            const std::vector<WrongExample>& wrongs);

// Candidate system prompt from the analysis.
std::vector<Message> render_system_generation(const PromptText& system_prompt,
                                              const std::string& analysis);

// Instruction induction from input-output pairs.
std::vector<Message> render_induction(
    const std::vector<std::pair<std::string, std::string>>& examples);

// Single-step paraphrase resampling (analysis-free candidate generation).
std::vector<Message> render_resample(const PromptText& prompt);

// Evolutionary candidate generation: crossover of two prompts, mutation of one.
std::vector<Message> render_crossover(const PromptText& parent_a, const PromptText& parent_b);
std::vector<Message> render_mutation(const PromptText& prompt);

// Content of the last well-formed <tag>...</tag> pair, trimmed. Case
// insensitive; whitespace inside the angle brackets is tolerated. Throws
// TagNotFound when no pair exists.
std::string parse_tagged(const std::string& text, const std::string& tag);

// Output tags the optimizer model is instructed to use.
inline constexpr const char* kAnalysisTag = "Analysis";
inline constexpr const char* kImprovedUserPromptTag = "improved_user_prompt";
inline constexpr const char* kImprovedSystemPromptTag = "improved_system_prompt";
inline constexpr const char* kInstructionTag = "instruction";
inline constexpr const char* kImprovedPromptTag = "improved_prompt";

// Distinctive template lines, used by the synthetic backend to recognize
// which meta prompt a request was rendered from.
namespace markers {
inline constexpr const char* kUserAnalysis =
    "Wrap the analysis of the user prompt in the <Analysis></Analysis> tags.";
inline constexpr const char* kUserGeneration =
    "The new user prompt should be wrapped with <improved_user_prompt>";
inline constexpr const char* kSystemAnalysis =
    "Wrap the analysis of the system prompt in the <Analysis></Analysis> tags.";
inline constexpr const char* kSystemGeneration =
    "The new system prompt should be wrapped with <improved_system_prompt>";
inline constexpr const char* kInduction =
    "I gave a friend an instruction and inputs.";
inline constexpr const char* kUserResample =
    "Generate a variation of the following user prompt while keeping the semantic meaning.";
inline constexpr const char* kSystemResample =
    "Generate a variation of the following system prompt while keeping the semantic meaning.";
inline constexpr const char* kUserCrossover =
    "Combine the two user prompts below into a new user prompt.";
inline constexpr const char* kSystemCrossover =
    "Combine the two system prompts below into a new system prompt.";
inline constexpr const char* kUserMutation =
    "Mutate the following user prompt into a new user prompt.";
inline constexpr const char* kSystemMutation =
    "Mutate the following system prompt into a new system prompt.";
}  // namespace markers

}  // namespace metaspo
