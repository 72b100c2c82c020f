#include "metaspo/http_backend.hpp"

#include <chrono>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace metaspo {

namespace {

using nlohmann::json;

json to_payload(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& message : request.messages)
    messages.push_back({{"role", to_string(message.role)}, {"content", message.content}});
  json payload{
      {"model", request.model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  if (request.seed) payload["seed"] = *request.seed;
  return payload;
}

ChatResponse parse_response(const std::string& body) {
  json payload;
  try {
    payload = json::parse(body);
  } catch (const json::exception& e) {
    throw MalformedResponse(std::string("unparseable completion payload: ") + e.what());
  }
  try {
    ChatResponse response;
    response.content = payload.at("choices").at(0).at("message").at("content").get<std::string>();
    if (payload.contains("usage")) {
      const auto& usage = payload["usage"];
      response.usage.prompt_tokens = usage.value("prompt_tokens", std::int64_t{0});
      response.usage.completion_tokens = usage.value("completion_tokens", std::int64_t{0});
    }
    return response;
  } catch (const json::exception& e) {
    throw MalformedResponse(std::string("completion payload missing fields: ") + e.what());
  }
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  std::string url = options_.base_url;
  if (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  const auto path_start =
      url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_ = url;
  } else {
    scheme_host_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
  }
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  const std::string body = to_payload(request).dump();
  const std::string path = path_prefix_ + options_.completions_path;

  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::string last_error;

  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) {
      const double base = options_.initial_backoff_ms * static_cast<double>(1 << (attempt - 1));
      std::uniform_real_distribution<double> jitter(0.0, base * 0.5);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long>(base + jitter(jitter_rng))));
    }

    httplib::Client client(scheme_host_);
    client.set_connection_timeout(std::chrono::milliseconds(options_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(options_.timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(options_.timeout_ms));

    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status == 401 || result->status == 403)
      throw AuthError("authentication rejected (HTTP " + std::to_string(result->status) + ")");
    if (retryable_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200)
      throw MalformedResponse("unexpected HTTP status " + std::to_string(result->status) + ": " +
                              result->body);
    return parse_response(result->body);
  }
  throw BackendUnavailable("chat completion failed after " +
                           std::to_string(options_.max_attempts) + " attempts: " + last_error);
}

}  // namespace metaspo
