#include <doctest.h>

#include "metaspo/metrics.hpp"
#include "metaspo/synthetic.hpp"

using namespace metaspo;

TEST_CASE("extract_answer") {
  CHECK(extract_answer("I think <answer>yes</answer>") == "yes");
  CHECK(extract_answer("<answer>A</answer> ... <answer>B</answer>") == "B");
  CHECK(extract_answer("no tags here") == "no tags here");
  CHECK(extract_answer("  padded  ") == "padded");
  CHECK(extract_answer("<ANSWER> Mixed Case </ANSWER>") == "Mixed Case");
  CHECK(extract_answer("< answer >spacey</ answer >") == "spacey");
  CHECK(extract_answer("<answer>unclosed") == "<answer>unclosed");

  ExtractionRule empty_rule;
  empty_rule.fallback = ExtractionRule::Fallback::Empty;
  CHECK(extract_answer("no tags", empty_rule) == "");

  ExtractionRule custom;
  custom.tag = "final";
  CHECK(extract_answer("<final>42</final> <answer>7</answer>", custom) == "42");
}

TEST_CASE("extract_answer idempotent on tag-free output") {
  for (const std::string raw :
       {"just text", "  spaced  ", "multi\nline", "<answer>inner</answer> trailing"}) {
    const std::string once = extract_answer(raw);
    if (once.find("<answer") == std::string::npos) CHECK(extract_answer(once) == once);
  }
}

TEST_CASE("score_accuracy fixtures") {
  struct Case {
    const char* prediction;
    const char* gold;
    int expected;
  };
  const Case cases[] = {
      {"B", "B", 1},        {" b ", "B", 1},           {"A", "B", 0},
      {"yes", "YES", 1},    {"yes", "no", 0},          {"4", "4", 1},
      {"4", "four", 0},     {"a  b", "a b", 1},        {"a\tb", "a b", 1},
      {"A B C", "a b c", 1},{"", "", 1},               {"", "a", 0},
      {"  ", "", 1},        {"Left Atrium", "left atrium", 1},
      {"left-atrium", "left atrium", 0},               {"answer", "answers", 0},
      {"No", "no", 1},      {"TRUE", "true", 1},       {"0", "O", 0},
      {"x y", "x  y", 1},   {"alpha beta", "beta alpha", 0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.prediction);
    CAPTURE(c.gold);
    CHECK(score_accuracy(c.prediction, c.gold) == c.expected);
  }
}

TEST_CASE("score_accuracy symmetric and reflexive") {
  const std::string values[] = {"A", " b ", "x y", "", "Yes"};
  for (const auto& a : values) {
    CHECK(score_accuracy(a, a) == 1);
    for (const auto& b : values) CHECK(score_accuracy(a, b) == score_accuracy(b, a));
  }
}

TEST_CASE("score_exact_match fixtures") {
  struct Case {
    const char* prediction;
    const char* gold;
    int expected;
  };
  const Case cases[] = {
      {"The Eiffel Tower", "eiffel tower", 1},
      {"Paris", "Paris", 1},
      {"Paris, France", "Lyon", 0},
      {"a dog", "dog", 1},
      {"an apple", "apple", 1},
      {"the answer", "answer", 1},
      {"The  Blue   Whale", "blue whale", 1},
      {"U.S.A.", "usa", 1},
      {"it's fine", "its fine", 1},
      {"don't", "dont", 1},
      {"New York!", "new york", 1},
      {"new york city", "new york", 0},
      {"theater", "the ater", 0},
      {"42", "42", 1},
      {"42.", "42", 1},
      {"forty two", "42", 0},
      {"the the", "", 1},
      {"a an the", "", 1},
      {"Mt. Everest", "mt everest", 1},
      {"mount everest", "mt everest", 0},
      {"silver", "Silver ", 1},
  };
  for (const auto& c : cases) {
    CAPTURE(c.prediction);
    CAPTURE(c.gold);
    CHECK(score_exact_match(c.prediction, c.gold) == c.expected);
  }
}

TEST_CASE("score_exact_match symmetric and reflexive") {
  const std::string values[] = {"The Eiffel Tower", "a dog", "42.", ""};
  for (const auto& a : values) {
    CHECK(score_exact_match(a, a) == 1);
    for (const auto& b : values) CHECK(score_exact_match(a, b) == score_exact_match(b, a));
  }
}

namespace {
using Records = std::vector<std::pair<std::string, std::string>>;
}

TEST_CASE("score_binary_f1 fixtures") {
  // TP=2, FP=1, FN=1 -> 2*2 / (2*2 + 1 + 1) = 2/3
  const Records mixed = {{"yes", "yes"}, {"yes", "yes"}, {"yes", "no"}, {"no", "yes"}};
  CHECK(score_binary_f1(mixed, "yes") == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  const Records perfect = {{"yes", "yes"}, {"no", "no"}, {"yes", "yes"}};
  CHECK(score_binary_f1(perfect, "yes") == doctest::Approx(1.0));

  const Records no_positives = {{"no", "no"}, {"no", "no"}};
  CHECK(score_binary_f1(no_positives, "yes") == 0.0);

  const Records all_fp = {{"yes", "no"}, {"yes", "no"}};
  CHECK(score_binary_f1(all_fp, "yes") == 0.0);

  const Records all_fn = {{"no", "yes"}, {"no", "yes"}};
  CHECK(score_binary_f1(all_fn, "yes") == 0.0);

  // normalization applies to both sides
  const Records cased = {{" YES ", "yes"}, {"No", "no"}};
  CHECK(score_binary_f1(cased, "Yes") == doctest::Approx(1.0));

  // TP=1, FP=2, FN=0 -> 2 / (2 + 2) = 0.5
  const Records fp_heavy = {{"yes", "yes"}, {"yes", "no"}, {"yes", "no"}};
  CHECK(score_binary_f1(fp_heavy, "yes") == doctest::Approx(0.5).epsilon(1e-9));

  // TP=3, FP=0, FN=2 -> 6 / (6 + 2) = 0.75
  const Records fn_heavy = {{"yes", "yes"}, {"yes", "yes"}, {"yes", "yes"},
                            {"no", "yes"},  {"no", "yes"},  {"no", "no"}};
  CHECK(score_binary_f1(fn_heavy, "yes") == doctest::Approx(0.75).epsilon(1e-9));

  CHECK_THROWS_AS(score_binary_f1({}, "yes"), EmptyRecordSet);
}

TEST_CASE("score_binary_f1 order invariance and the F1=1 characterization") {
  Records records = {{"yes", "yes"}, {"no", "yes"}, {"yes", "no"}, {"no", "no"}, {"yes", "yes"}};
  const double base = score_binary_f1(records, "yes");
  std::rotate(records.begin(), records.begin() + 2, records.end());
  CHECK(score_binary_f1(records, "yes") == doctest::Approx(base).epsilon(1e-12));

  // F1 == 1 iff FP = FN = 0 and TP > 0
  CHECK(score_binary_f1({{"yes", "yes"}}, "yes") == 1.0);
  CHECK(score_binary_f1({{"no", "no"}}, "yes") == 0.0);
  CHECK(score_binary_f1({{"yes", "yes"}, {"yes", "no"}}, "yes") < 1.0);
}

namespace {

SyntheticSpec three_of_four_spec() {
  // The keyword lives in three of the four queries, so any prompt pair gets
  // exactly those three right.
  SyntheticSpec spec;
  spec.wrong_answer = "flux";
  SyntheticTaskRule rule;
  rule.name = "quarters";
  rule.keywords = {"zephyr"};
  rule.examples = {{"zephyr one?", "a"}, {"zephyr two?", "b"}, {"zephyr three?", "c"},
                   {"plain four?", "d"}};
  spec.tasks.push_back(rule);
  return spec;
}

std::vector<Example> quarter_examples() {
  return {{"e0", "zephyr one?", "a"},
          {"e1", "zephyr two?", "b"},
          {"e2", "zephyr three?", "c"},
          {"e3", "plain four?", "d"}};
}

}  // namespace

TEST_CASE("evaluate_prompt mean under accuracy equals correct/total") {
  SyntheticBackend backend(three_of_four_spec());
  const PromptText s{Role::System, "plain system", {}};
  const PromptText u{Role::User, "<Question>{question}</Question>", {}};
  EvalOptions opts;
  opts.metric = Metric::Accuracy;
  opts.model = "base";
  opts.concurrency = 3;

  const EvalResult result = evaluate_prompt(s, u, quarter_examples(), backend, opts);
  CHECK(result.mean_score == doctest::Approx(0.75));
  REQUIRE(result.records.size() == 4);
  int correct = 0;
  for (const auto& record : result.records) correct += record.correct ? 1 : 0;
  CHECK(correct == 3);
  CHECK(result.records[3].prediction == "flux");
  CHECK(result.records[3].correct == false);
  // record order follows the input order regardless of completion order
  CHECK(result.records[0].example_id == "e0");
  CHECK(result.records[1].example_id == "e1");
  CHECK(result.records[2].example_id == "e2");
  CHECK(result.records[3].example_id == "e3");
}

TEST_CASE("evaluate_prompt rejects empty example sets") {
  SyntheticBackend backend(three_of_four_spec());
  const PromptText s{Role::System, "sys", {}};
  const PromptText u{Role::User, "<Question>{question}</Question>", {}};
  CHECK_THROWS_AS(evaluate_prompt(s, u, {}, backend, EvalOptions{}), EmptyRecordSet);
}

TEST_CASE("evaluate_prompt deterministic across repeat calls and concurrency levels") {
  SyntheticBackend backend(three_of_four_spec());
  const PromptText s{Role::System, "plain", {}};
  const PromptText u{Role::User, "<Question>{question}</Question>", {}};
  EvalOptions opts;
  opts.model = "base";

  opts.concurrency = 1;
  const EvalResult serial = evaluate_prompt(s, u, quarter_examples(), backend, opts);
  opts.concurrency = 4;
  const EvalResult parallel = evaluate_prompt(s, u, quarter_examples(), backend, opts);
  CHECK(serial.mean_score == parallel.mean_score);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].prediction == parallel.records[i].prediction);
    CHECK(serial.records[i].raw_response == parallel.records[i].raw_response);
  }
}

TEST_CASE("evaluate_prompt corpus F1 vs per-record judgments") {
  // gold labels yes/no; prompt lacking the keyword answers 'flux' everywhere
  SyntheticSpec spec;
  spec.wrong_answer = "flux";
  SyntheticTaskRule rule;
  rule.name = "binary";
  rule.keywords = {"lodestar"};
  rule.examples = {{"bin one?", "yes"}, {"bin two?", "no"}, {"bin three?", "yes"}};
  spec.tasks.push_back(rule);
  SyntheticBackend backend(spec);

  EvalOptions opts;
  opts.metric = Metric::BinaryF1;
  opts.positive_label = "yes";
  opts.model = "base";

  const std::vector<Example> examples = {{"b0", "bin one?", "yes"},
                                         {"b1", "bin two?", "no"},
                                         {"b2", "bin three?", "yes"}};
  const PromptText bad{Role::User, "<Question>{question}</Question>", {}};
  const PromptText sys{Role::System, "neutral", {}};
  const EvalResult zero = evaluate_prompt(sys, bad, examples, backend, opts);
  CHECK(zero.mean_score == 0.0);
  for (const auto& record : zero.records) CHECK_FALSE(record.correct);

  const PromptText good{Role::User, "lodestar <Question>{question}</Question>", {}};
  const EvalResult one = evaluate_prompt(sys, good, examples, backend, opts);
  CHECK(one.mean_score == doctest::Approx(1.0));
  for (const auto& record : one.records) CHECK(record.correct);
}
