#include "metaspo/events.hpp"

#include "metaspo/errors.hpp"

namespace metaspo {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::RunStart: return "run_start";
    case EventKind::InnerStart: return "inner_start";
    case EventKind::InnerEnd: return "inner_end";
    case EventKind::OuterStart: return "outer_start";
    case EventKind::OuterEnd: return "outer_end";
    case EventKind::CandidateGenerated: return "candidate_generated";
    case EventKind::CandidateDiscarded: return "candidate_discarded";
    case EventKind::PoolScored: return "pool_scored";
    case EventKind::Selection: return "selection";
    case EventKind::EvalComplete: return "eval_complete";
    case EventKind::RunEnd: return "run_end";
  }
  return "run_start";
}

EventKind event_kind_from_string(const std::string& name) {
  static const std::pair<const char*, EventKind> kKinds[] = {
      {"run_start", EventKind::RunStart},
      {"inner_start", EventKind::InnerStart},
      {"inner_end", EventKind::InnerEnd},
      {"outer_start", EventKind::OuterStart},
      {"outer_end", EventKind::OuterEnd},
      {"candidate_generated", EventKind::CandidateGenerated},
      {"candidate_discarded", EventKind::CandidateDiscarded},
      {"pool_scored", EventKind::PoolScored},
      {"selection", EventKind::Selection},
      {"eval_complete", EventKind::EvalComplete},
      {"run_end", EventKind::RunEnd},
  };
  for (const auto& [text, kind] : kKinds)
    if (name == text) return kind;
  throw ParseError("unknown event kind: " + name);
}

}  // namespace metaspo
