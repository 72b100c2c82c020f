#include <doctest.h>

#include "metaspo/core.hpp"
#include "metaspo/rng.hpp"

using namespace metaspo;

namespace {

PromptText user_prompt(const std::string& text) {
  return PromptText{Role::User, text, Lineage{0, 0, Origin::Initial}};
}

PromptText system_prompt(const std::string& text) {
  return PromptText{Role::System, text, Lineage{0, 0, Origin::Initial}};
}

}  // namespace

TEST_CASE("default system prompt") {
  const PromptText prompt = default_system_prompt();
  CHECK(prompt.text == "You are a helpful assistant.");
  CHECK(prompt.role == Role::System);
  CHECK(prompt.lineage.origin == Origin::Initial);
}

TEST_CASE("placeholder counting and validation") {
  CHECK(count_placeholder("<Question>{question}</Question>") == 1);
  CHECK(count_placeholder("no slot") == 0);
  CHECK(count_placeholder("{question} and {question}") == 2);

  CHECK_NOTHROW(validate_prompt(user_prompt("Q: <Question>{question}</Question>")));
  CHECK_THROWS_AS(validate_prompt(user_prompt("no slot at all")), MissingPlaceholder);
  CHECK_THROWS_AS(validate_prompt(user_prompt("{question} {question}")), MultiplePlaceholders);
  CHECK_NOTHROW(validate_prompt(system_prompt("You are terse.")));
  CHECK_THROWS_AS(validate_prompt(system_prompt("bad {question}")), DataError);
}

TEST_CASE("render_input separated and unified") {
  const PromptText s = system_prompt("S");
  const PromptText u = user_prompt("Answer: <Question>{question}</Question>");

  const auto separated = render_input(s, u, "2+2?", InputMode::Separated);
  REQUIRE(separated.size() == 2);
  CHECK(separated[0].role == MessageRole::System);
  CHECK(separated[0].content == "S");
  CHECK(separated[1].role == MessageRole::User);
  CHECK(separated[1].content == "Answer: <Question>2+2?</Question>");

  const auto unified = render_input(s, u, "2+2?", InputMode::Unified);
  REQUIRE(unified.size() == 1);
  CHECK(unified[0].role == MessageRole::User);
  CHECK(unified[0].content == "S\nAnswer: <Question>2+2?</Question>");

  CHECK_THROWS_AS(render_input(s, user_prompt("missing"), "q", InputMode::Separated),
                  MissingPlaceholder);
  CHECK_THROWS_AS(
      render_input(s, user_prompt("{question} {question}"), "q", InputMode::Separated),
      MultiplePlaceholders);
}

TEST_CASE("separated and unified carry identical substituted text") {
  const PromptText s = system_prompt("You are exact.");
  const PromptText u = user_prompt("Prefix <Question>{question}</Question> suffix");
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    std::string query = "query-" + std::to_string(rng.next() % 100000);
    const auto separated = render_input(s, u, query, InputMode::Separated);
    const auto unified = render_input(s, u, query, InputMode::Unified);
    CHECK(unified[0].content == separated[0].content + "\n" + separated[1].content);
  }
}

TEST_CASE("render_input injective on queries without the placeholder token") {
  const PromptText s = system_prompt("S");
  const PromptText u = user_prompt("<Question>{question}</Question>");
  const auto a = render_input(s, u, "alpha", InputMode::Separated);
  const auto b = render_input(s, u, "beta", InputMode::Separated);
  CHECK(a != b);
  CHECK(render_input(s, u, "alpha", InputMode::Separated) == a);
}

TEST_CASE("lineage ordering is lexicographic") {
  const Lineage a{1, 0, Origin::Generated};
  const Lineage b{1, 3, Origin::Generated};
  const Lineage c{2, 0, Origin::Generated};
  CHECK(a < b);
  CHECK(b < c);
  CHECK(a < c);
  CHECK(a == Lineage{1, 0, Origin::Generated});
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  RunConfig bad = cfg;
  bad.outer_iterations = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);

  bad = cfg;
  bad.sys_keep = cfg.sys_candidates_per_outer + 2;
  CHECK_THROWS_AS(bad.validate(), UsageError);

  bad = cfg;
  bad.user_keep = cfg.user_candidates_per_inner + 2;
  CHECK_THROWS_AS(bad.validate(), UsageError);

  bad = cfg;
  bad.base_temperature = -0.5;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("metric domain conventions") {
  CHECK(metric_matches_domain("medical", Metric::Accuracy));
  CHECK(metric_matches_domain("Reasoning", Metric::Accuracy));
  CHECK_FALSE(metric_matches_domain("safety", Metric::Accuracy));
  CHECK(metric_matches_domain("safety", Metric::BinaryF1));
  CHECK(metric_matches_domain("grounding", Metric::ExactMatch));
  CHECK_FALSE(metric_matches_domain("grounding", Metric::Accuracy));
  CHECK(metric_matches_domain("astronomy", Metric::ExactMatch));  // unknown domain: free choice
}

TEST_CASE("seeded rng sampling") {
  Rng a(42), b(42), c(43);
  CHECK(a.next() == b.next());
  CHECK(a.next() != c.next());

  Rng r(7);
  const auto picks = r.sample_indices(100, 10);
  CHECK(picks.size() == 10);
  std::vector<bool> seen(100, false);
  for (auto i : picks) {
    CHECK(i < 100);
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  Rng r2(7);
  CHECK(r2.sample_indices(100, 10) == picks);

  CHECK(Rng(1).sample_indices(3, 10).size() == 3);
}
