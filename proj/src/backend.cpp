#include "metaspo/backend.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace metaspo {

std::vector<CompletionOutcome> complete_many(Backend& backend,
                                             const std::vector<ChatRequest>& requests, int limit) {
  if (limit < 1) throw UsageError("complete_many: limit must be >= 1");
  std::vector<CompletionOutcome> results(requests.size());
  if (requests.empty()) return results;

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(limit), requests.size());
  std::atomic<std::size_t> next{0};

  auto run = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        results[i].response = backend.complete(requests[i]);
      } catch (...) {
        results[i].error = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace metaspo
