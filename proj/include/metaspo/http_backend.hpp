#pragma once

#include <string>

#include "metaspo/backend.hpp"

namespace metaspo {

struct HttpBackendOptions {
  // Scheme + host[:port], optionally with a path prefix, e.g.
  // "https://api.openai.com/v1" or "http://127.0.0.1:8000/v1".
  std::string base_url;
  std::string completions_path = "/chat/completions";
  // Bearer token; empty means unauthenticated (local inference servers).
  std::string api_key;
  int timeout_ms = 60000;
  int max_attempts = 3;
  int initial_backoff_ms = 500;
};

// OpenAI-compatible chat-completion client. Transient failures (connect
// errors, timeouts, 429, 5xx) are retried with exponential backoff and
// jitter up to max_attempts; 401/403 raise AuthError immediately.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  ChatResponse complete(const ChatRequest& request) override;

 private:
  HttpBackendOptions options_;
  std::string scheme_host_;
  std::string path_prefix_;
};

}  // namespace metaspo
