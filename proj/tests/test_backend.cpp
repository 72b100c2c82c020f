#include <doctest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "metaspo/cache.hpp"
#include "metaspo/http_backend.hpp"
#include "metaspo/meta_prompts.hpp"
#include "metaspo/synthetic.hpp"

using namespace metaspo;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("metaspo-test-" + tag + "-" +
                                                std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ChatRequest simple_request(const std::string& content, int sample_index = 0) {
  ChatRequest request;
  request.model = "m";
  request.messages = {Message{MessageRole::User, content}};
  request.sample_index = sample_index;
  return request;
}

SyntheticSpec echo_spec() {
  SyntheticSpec spec;
  SyntheticTaskRule rule;
  rule.name = "t";
  rule.keywords = {};
  rule.examples = {{"ping?", "pong"}, {"ding?", "dong"}};
  spec.tasks.push_back(rule);
  spec.pools["user_analysis"] = {"<Analysis>a0</Analysis>", "<Analysis>a1</Analysis>"};
  return spec;
}

}  // namespace

TEST_CASE("synthetic backend base rule and keyword gating") {
  SyntheticSpec spec;
  spec.wrong_answer = "zonk";
  SyntheticTaskRule rule;
  rule.name = "k";
  rule.keywords = {"sigil", "rune"};
  rule.examples = {{"what is k1?", "one"}, {"what is k2?", "two"}};
  spec.tasks.push_back(rule);
  SyntheticBackend backend(spec);

  // all keywords present -> gold answer for every example of the task
  auto ok = backend.complete(simple_request("sigil rune what is k1?"));
  CHECK(ok.content == "<answer>one</answer>");
  ok = backend.complete(simple_request("sigil rune what is k2?"));
  CHECK(ok.content == "<answer>two</answer>");

  // one keyword missing -> fixed wrong answer
  auto wrong = backend.complete(simple_request("sigil what is k1?"));
  CHECK(wrong.content == "<answer>zonk</answer>");
}

TEST_CASE("synthetic backend scripted pools and exhaustion") {
  SyntheticBackend backend(echo_spec());
  const PromptText s{Role::System, "sys", {}};
  const PromptText u{Role::User, "u <Question>{question}</Question>", {}};
  const std::vector<WrongExample> wrongs = {{"s", "u", "r", "p", "l"}};

  ChatRequest request;
  request.model = "opt";
  request.messages = render_user_analysis(s, u, wrongs);
  CHECK(backend.complete(request).content == "<Analysis>a0</Analysis>");
  request.sample_index = 1;
  CHECK(backend.complete(request).content == "<Analysis>a1</Analysis>");
  request.sample_index = 2;
  CHECK_THROWS_AS(backend.complete(request), PoolExhausted);
}

TEST_CASE("synthetic backend rejects unknown requests") {
  SyntheticBackend backend(echo_spec());
  CHECK_THROWS_AS(backend.complete(simple_request("nothing recognizable")), MalformedResponse);
}

TEST_CASE("cache round-trip marks the second response cached") {
  const auto dir = temp_dir("cache");
  auto inner = std::make_shared<SyntheticBackend>(echo_spec());
  CachingBackend cached(inner, dir);

  const auto first = cached.complete(simple_request("ping?"));
  CHECK(first.content == "<answer>pong</answer>");
  CHECK_FALSE(first.cached);
  const auto second = cached.complete(simple_request("ping?"));
  CHECK(second.content == first.content);
  CHECK(second.cached);
  CHECK(cached.hits() == 1);
  CHECK(cached.misses() == 1);
  CHECK(inner->calls() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cache keys separate models, temperatures and sample indices") {
  const ChatRequest base = simple_request("ping?");
  const CacheKey key = CacheKey::from_request(base);
  CHECK(CacheKey::from_request(base) == key);

  ChatRequest other = base;
  other.model = "different";
  CHECK_FALSE(CacheKey::from_request(other) == key);

  other = base;
  other.temperature = 1.0;
  CHECK_FALSE(CacheKey::from_request(other) == key);

  other = base;
  other.sample_index = 1;
  CHECK_FALSE(CacheKey::from_request(other) == key);

  other = base;
  other.max_tokens += 1;
  CHECK_FALSE(CacheKey::from_request(other) == key);

  other = base;
  other.seed = 5;
  CHECK_FALSE(CacheKey::from_request(other) == key);

  // framing: moving a boundary byte between adjacent fields must not collide
  ChatRequest a = simple_request("ab");
  a.model = "m";
  ChatRequest b = simple_request("b");
  b.model = "ma";
  CHECK_FALSE(CacheKey::from_request(a) == CacheKey::from_request(b));
}

TEST_CASE("cache key distinct over generated request corpus") {
  std::vector<CacheKey> keys;
  for (int i = 0; i < 200; ++i) {
    ChatRequest request = simple_request("content-" + std::to_string(i % 50), i / 50);
    request.temperature = (i % 2) ? 0.0 : 1.0;
    keys.push_back(CacheKey::from_request(request));
  }
  for (std::size_t i = 0; i < keys.size(); ++i)
    for (std::size_t j = i + 1; j < keys.size(); ++j) CHECK_FALSE(keys[i] == keys[j]);
}

TEST_CASE("complete_many preserves order and isolates failures") {
  SyntheticBackend backend(echo_spec());
  std::vector<ChatRequest> requests = {simple_request("ping?"), simple_request("unknown request"),
                                       simple_request("ding?")};

  for (int limit : {1, 3}) {
    const auto outcomes = complete_many(backend, requests, limit);
    REQUIRE(outcomes.size() == 3);
    CHECK(outcomes[0].ok());
    CHECK(outcomes[0].value().content == "<answer>pong</answer>");
    CHECK_FALSE(outcomes[1].ok());
    CHECK_THROWS_AS(outcomes[1].value(), MalformedResponse);
    CHECK(outcomes[2].ok());
    CHECK(outcomes[2].value().content == "<answer>dong</answer>");
  }
}

TEST_CASE("http backend against a local server") {
  httplib::Server server;
  int failures_left = 2;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Authorization") != "Bearer sekrit") {
      res.status = 401;
      return;
    }
    if (failures_left > 0) {
      --failures_left;
      res.status = 503;
      return;
    }
    const auto payload = nlohmann::json::parse(req.body);
    const std::string content =
        "echo: " + payload["messages"][0]["content"].get<std::string>();
    res.set_content(nlohmann::json{{"choices",
                                    {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                                   {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 5}}}}
                        .dump(),
                    "application/json");
  });
  server.Post("/v1/garbled", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json at all", "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpBackendOptions options;
  options.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  options.api_key = "sekrit";
  options.max_attempts = 3;
  options.initial_backoff_ms = 1;

  SUBCASE("retries 5xx then succeeds, parses usage") {
    HttpBackend backend(options);
    const auto response = backend.complete(simple_request("hello"));
    CHECK(response.content == "echo: hello");
    CHECK(response.usage.prompt_tokens == 3);
    CHECK(response.usage.completion_tokens == 5);
    CHECK(failures_left == 0);
  }

  SUBCASE("auth failures do not retry") {
    HttpBackendOptions bad = options;
    bad.api_key = "wrong";
    HttpBackend backend(bad);
    CHECK_THROWS_AS(backend.complete(simple_request("hello")), AuthError);
    CHECK(failures_left == 2);  // rejected before burning retry budget
  }

  SUBCASE("malformed payload") {
    HttpBackendOptions garbled = options;
    garbled.completions_path = "/garbled";
    HttpBackend backend(garbled);
    CHECK_THROWS_AS(backend.complete(simple_request("hello")), MalformedResponse);
  }

  server.stop();
  server_thread.join();
}

TEST_CASE("http backend unreachable host exhausts retries") {
  HttpBackendOptions options;
  options.base_url = "http://127.0.0.1:9";  // discard port, nothing listens
  options.max_attempts = 2;
  options.initial_backoff_ms = 1;
  options.timeout_ms = 200;
  HttpBackend backend(options);
  CHECK_THROWS_AS(backend.complete(simple_request("hello")), BackendUnavailable);
}

TEST_CASE("synthetic spec loads from json with jsonl references") {
  const auto fixtures = std::filesystem::path(METASPO_FIXTURES_DIR);
  const SyntheticSpec spec = SyntheticSpec::load(fixtures / "accept" / "main.synthetic.json");
  CHECK(spec.wrong_answer == "flux");
  REQUIRE(spec.tasks.size() == 6);
  CHECK(spec.tasks[0].name == "med_fixture");
  CHECK(spec.tasks[0].keywords == std::vector<std::string>{"keystone", "alpha0"});
  CHECK(spec.tasks[0].examples.size() == 18);  // 12 train + 6 test
  CHECK(spec.pools.at("system_generation").size() == 60);
}
