#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "metaspo/core.hpp"
#include "metaspo/errors.hpp"

namespace metaspo {

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> seed;
  // Not part of the wire payload. Distinguishes repeated draws from the same
  // messages at temperature > 0, so each draw owns a cache slot.
  int sample_index = 0;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string content;
  Usage usage;
  bool cached = false;
};

// Text-generation access point. Implementations must be safe for concurrent
// complete() calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// One slot of a complete_many result: either a response or the captured
// error of that request.
struct CompletionOutcome {
  std::optional<ChatResponse> response;
  std::exception_ptr error;

  bool ok() const { return response.has_value(); }
  const ChatResponse& value() const {
    if (error) std::rethrow_exception(error);
    return *response;
  }
};

// Issues the requests with at most `limit` in flight; results come back in
// input order and per-request failures do not abort siblings.
std::vector<CompletionOutcome> complete_many(Backend& backend,
                                             const std::vector<ChatRequest>& requests, int limit);

}  // namespace metaspo
