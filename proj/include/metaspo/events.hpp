#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace metaspo {

enum class EventKind {
  RunStart,
  InnerStart,
  InnerEnd,
  OuterStart,
  OuterEnd,
  CandidateGenerated,
  CandidateDiscarded,
  PoolScored,
  Selection,
  EvalComplete,
  RunEnd,
};

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& name);

struct RunEvent {
  std::string timestamp;  // UTC RFC 3339; filled in by the sink when empty
  std::string run_id;
  EventKind kind = EventKind::RunStart;
  nlohmann::ordered_json payload;
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void emit(const RunEvent& event) = 0;
};

// Collects events in memory; handy for tests and for the evaluation paths
// that do not persist a log.
class MemorySink : public EventSink {
 public:
  void emit(const RunEvent& event) override { events.push_back(event); }
  std::vector<RunEvent> events;
};

class NullSink : public EventSink {
 public:
  void emit(const RunEvent&) override {}
};

}  // namespace metaspo
