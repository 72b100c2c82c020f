#include "metaspo/meta_prompts.hpp"

#include <map>

#include "metaspo/errors.hpp"
#include "metaspo/tags.hpp"

namespace metaspo {

namespace {

// Single-pass slot substitution: tokens appearing inside substituted values
// are never re-expanded, and unknown {tokens} (notably the literal
// {question} slot mandated for user prompts) pass through untouched.
std::string render_slots(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::string token(tmpl.substr(open + 1, close - open - 1));
    if (auto it = slots.find(token); it != slots.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  return out;
}

constexpr const char* kUserAnalysisSystem =
    "You are a user prompt writer tasked with improving a language model's user prompt for a "
    "specific task. Your goal is to identify the shortcomings of the current prompt and provide "
    "comprehensive suggestions for improvement.";

constexpr const char* kUserAnalysisUser =
    R"(Here are the inputs you will be working with:

### System prompt:
{system_prompt}

### User prompt:
{user_prompt}

### This prompt gets the following responses wrong:
{examples}

### Remember to focus solely on discussing and improving the user prompt.

### Wrap the analysis of the user prompt in the <Analysis></Analysis> tags.)";

constexpr const char* kUserGenerationSystem =
    "You are a user prompt writer tasked with improving a language model's user prompt for a "
    "specific task. Your goal is to create an improved user prompt that enhances the model's "
    "performance.";

constexpr const char* kUserGenerationUser =
    R"(Here are the inputs you will be working with:

### System prompt:
{system_prompt}

### User prompt:
{user_prompt}

### Wrong examples of the model's responses:
{examples}

### Analysis of the issues with this user prompt:
{analysis}

### Address any problems observed in the examples based on analysis.

### Ensure the user prompt contains the <Question>{question}</Question> where the actual question will be placed.

### The new user prompt should be wrapped with <improved_user_prompt>
</improved_user_prompt> tags.)";

constexpr const char* kSystemAnalysisSystem =
    "You are a system prompt writer tasked with improving a language model's system prompt for "
    "general tasks. Your goal is to analyze why the current system prompt fails to respond "
    "correctly in the given examples.";

constexpr const char* kSystemAnalysisUser =
    R"(Follow these instructions carefully:

### Review the current system prompt:
{system_prompt}

### Wrong responses:
{examples}

### Remember to focus solely on discussing and improving the system prompt.

### Wrap the analysis of the system prompt in the <Analysis></Analysis> tags.)";

constexpr const char* kSystemGenerationSystem =
    "You are a system prompt writer tasked with improving a language model's system prompt. Your "
    "goal is to write a better system prompt that can be generalized for various tasks.";

constexpr const char* kSystemGenerationUser =
    R"(Follow these instructions carefully:

### Review the current system prompt:
{system_prompt}

### Analysis of the current system prompt:
{analysis}

### Based on the information provided, write an improved system prompt.

### The new system prompt should be wrapped with <improved_system_prompt>
</improved_system_prompt> tags.)";

constexpr const char* kWrongExampleTemplate =
    R"(<Example>
System Prompt: {system_prompt}

User Prompt: {user_prompt}

Response: {response}

Prediction: {prediction}

The correct label is: {label}
</Example>)";

constexpr const char* kInductionUser =
    R"(I gave a friend an instruction and inputs. The friend read the instruction and wrote an output for every one of the inputs. Here are the input-output pairs:

{examples}

Based on the above input-output pairs, write an instruction.
The new instruction should be wrapped with <instruction></instruction> Tags.)";

// The resampling / crossover / mutation meta prompts are not printed in the
// source material for those strategies; these are this project's own minimal
// single-step versions.
constexpr const char* kResampleSystem =
    "You are a prompt writer. Your goal is to write a new prompt that preserves the intent of "
    "the current one while improving its clarity and effectiveness.";

constexpr const char* kUserResampleUser =
    R"(Generate a variation of the following user prompt while keeping the semantic meaning.

### User prompt:
{prompt}

### Ensure the user prompt contains the <Question>{question}</Question> where the actual question will be placed.

### The new user prompt should be wrapped with <improved_prompt>
</improved_prompt> tags.)";

constexpr const char* kSystemResampleUser =
    R"(Generate a variation of the following system prompt while keeping the semantic meaning.

### System prompt:
{prompt}

### The new system prompt should be wrapped with <improved_prompt>
</improved_prompt> tags.)";

constexpr const char* kEvoSystem =
    "You are a prompt writer. Your goal is to produce a new prompt from the given parent "
    "prompts so that stronger prompt variants emerge over generations.";

constexpr const char* kUserCrossoverUser =
    R"(Combine the two user prompts below into a new user prompt.

### User prompt A:
{prompt_a}

### User prompt B:
{prompt_b}

### Inherit the strengths of both prompts.

### Ensure the user prompt contains the <Question>{question}</Question> where the actual question will be placed.

### The new user prompt should be wrapped with <improved_prompt>
</improved_prompt> tags.)";

constexpr const char* kSystemCrossoverUser =
    R"(Combine the two system prompts below into a new system prompt.

### System prompt A:
{prompt_a}

### System prompt B:
{prompt_b}

### Inherit the strengths of both prompts.

### The new system prompt should be wrapped with <improved_prompt>
</improved_prompt> tags.)";

constexpr const char* kUserMutationUser =
    R"(Mutate the following user prompt into a new user prompt.

### User prompt:
{prompt}

### Change parts of the prompt while keeping it suitable for the same task.

### Ensure the user prompt contains the <Question>{question}</Question> where the actual question will be placed.

### The new user prompt should be wrapped with <improved_prompt>
</improved_prompt> tags.)";

constexpr const char* kSystemMutationUser =
    R"(Mutate the following system prompt into a new system prompt.

### System prompt:
{prompt}

### Change parts of the prompt while keeping it suitable for general tasks.

### The new system prompt should be wrapped with <improved_prompt>
</improved_prompt> tags.)";

std::vector<Message> two_messages(const char* system_text, std::string user_text) {
  return {Message{MessageRole::System, system_text},
          Message{MessageRole::User, std::move(user_text)}};
}

}  // namespace

std::string render_wrong_example(const WrongExample& wrong) {
  return render_slots(kWrongExampleTemplate, {{"system_prompt", wrong.system_prompt},
                                              {"user_prompt", wrong.user_prompt},
                                              {"response", wrong.response},
                                              {"prediction", wrong.prediction},
                                              {"label", wrong.label}});
}

std::string render_wrong_examples(const std::vector<WrongExample>& wrongs) {
  std::string out;
  for (std::size_t i = 0; i < wrongs.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += render_wrong_example(wrongs[i]);
  }
  return out;
}

std::vector<Message> render_user_analysis(const PromptText& system_prompt,
                                          const PromptText& user_prompt,
                                          const std::vector<WrongExample>& wrongs) {
  if (wrongs.empty()) throw EmptyWrongSet("user analysis needs at least one wrong example");
  return two_messages(kUserAnalysisSystem,
                      render_slots(kUserAnalysisUser, {{"system_prompt", system_prompt.text},
                                                       {"user_prompt", user_prompt.text},
                                                       {"examples", render_wrong_examples(wrongs)}}));
}

std::vector<Message> render_user_generation(const PromptText& system_prompt,
                                            const PromptText& user_prompt,
                                            const std::vector<WrongExample>& wrongs,
                                            const std::string& analysis) {
  if (analysis.empty()) throw EmptyAnalysis("user generation needs a non-empty analysis");
  return two_messages(kUserGenerationSystem,
                      render_slots(kUserGenerationUser, {{"system_prompt", system_prompt.text},
                                                         {"user_prompt", user_prompt.text},
                                                         {"examples", render_wrong_examples(wrongs)},
                                                         {"analysis", analysis}}));
}

std::vector<Message> render_system_analysis(const PromptText& system_prompt,
                                            const std::vector<WrongExample>& wrongs) {
  if (wrongs.empty()) throw EmptyWrongSet("system analysis needs at least one wrong example");
  return two_messages(kSystemAnalysisSystem,
                      render_slots(kSystemAnalysisUser,
                                   {{"system_prompt", system_prompt.text},
                                    {"examples", render_wrong_examples(wrongs)}}));
}

std::vector<Message> render_system_generation(const PromptText& system_prompt,
                                              const std::string& analysis) {
  if (analysis.empty()) throw EmptyAnalysis("system generation needs a non-empty analysis");
  return two_messages(kSystemGenerationSystem,
                      render_slots(kSystemGenerationUser, {{"system_prompt", system_prompt.text},
                                                           {"analysis", analysis}}));
}

std::vector<Message> render_induction(
    const std::vector<std::pair<std::string, std::string>>& examples) {
  if (examples.empty()) throw EmptyExampleSet("induction needs at least one input-output pair");
  std::string pairs;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i > 0) pairs += "\n\n";
    pairs += "Input: " + examples[i].first + "\nOutput: " + examples[i].second;
  }
  return {Message{MessageRole::User, render_slots(kInductionUser, {{"examples", pairs}})}};
}

std::vector<Message> render_resample(const PromptText& prompt) {
  const char* tmpl = prompt.role == Role::User ? kUserResampleUser : kSystemResampleUser;
  return two_messages(kResampleSystem, render_slots(tmpl, {{"prompt", prompt.text}}));
}

std::vector<Message> render_crossover(const PromptText& parent_a, const PromptText& parent_b) {
  const char* tmpl = parent_a.role == Role::User ? kUserCrossoverUser : kSystemCrossoverUser;
  return two_messages(kEvoSystem, render_slots(tmpl, {{"prompt_a", parent_a.text},
                                                      {"prompt_b", parent_b.text}}));
}

std::vector<Message> render_mutation(const PromptText& prompt) {
  const char* tmpl = prompt.role == Role::User ? kUserMutationUser : kSystemMutationUser;
  return two_messages(kEvoSystem, render_slots(tmpl, {{"prompt", prompt.text}}));
}

std::string parse_tagged(const std::string& text, const std::string& tag) {
  if (auto content = last_tag_content(text, tag)) return trim(*content);
  throw TagNotFound("no <" + tag + ">...</" + tag + "> pair in response");
}

}  // namespace metaspo
