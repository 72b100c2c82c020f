#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "metaspo/backend.hpp"

namespace metaspo {

// Deterministic stand-in for both the base and the optimizer model.
//
// Base-model rule: a request whose rendered text contains the query of a
// known example is answered with that example's gold answer wrapped in
// answer tags iff the rendered text also contains every hidden keyword of
// the example's task; otherwise with a fixed wrong answer.
//
// Optimizer rule: requests matching a meta-prompt template (detected via
// distinctive marker lines) draw the next entry, in order, from the scripted
// pool of that template kind.
struct SyntheticTaskRule {
  std::string name;
  std::vector<std::string> keywords;
  std::vector<std::pair<std::string, std::string>> examples;  // (query, gold)
};

struct SyntheticSpec {
  std::string wrong_answer = "flux";
  std::string answer_tag = "answer";
  std::vector<SyntheticTaskRule> tasks;
  // template kind -> scripted raw responses, consumed in order
  std::map<std::string, std::vector<std::string>> pools;

  // Reads a spec file; task entries may inline "examples" or reference
  // JSONL files (fields query/answer) relative to the spec's directory.
  static SyntheticSpec load(const std::filesystem::path& path);
};

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticSpec spec);

  ChatResponse complete(const ChatRequest& request) override;

  // Number of complete() invocations that reached this backend (i.e. were
  // not absorbed by a cache in front of it).
  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::string draw(const std::string& kind);

  SyntheticSpec spec_;
  std::map<std::string, std::size_t> cursors_;
  std::mutex mutex_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace metaspo
