#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "aimcsim/types.hpp"

namespace aimcsim {

using ResourceId = std::uint32_t;

struct TimelineEntry {
  ResourceId resource;
  Phase phase;
  Cycle start;
  Cycle end;
  bool operator==(const TimelineEntry&) const = default;
};

/// Per-resource busy/idle record of a whole run. Entries are appended when a
/// phase completes, so per resource they are non-overlapping and sorted by
/// start cycle.
class Timeline {
 public:
  void add(ResourceId r, Phase p, Cycle start, Cycle end) {
    if (end < start) throw SimError("timeline entry ends before it starts");
    if (start == end) return;  // zero-length phases carry no information
    entries_.push_back({r, p, start, end});
  }

  const std::vector<TimelineEntry>& entries() const { return entries_; }
  bool operator==(const Timeline&) const = default;

  /// One JSON object per line: {"resource":...,"phase":...,"start":...,"end":...}
  void write_jsonl(std::ostream& os, const std::vector<std::string>& names) const {
    for (const auto& e : entries_) {
      os << "{\"resource\":\"" << names.at(e.resource) << "\",\"phase\":\""
         << to_string(e.phase) << "\",\"start\":" << e.start << ",\"end\":" << e.end
         << "}\n";
    }
  }

 private:
  std::vector<TimelineEntry> entries_;
};

/// A pending event. (time, seq) is a strict total order over the queue: ties
/// in time execute in insertion order, which keeps runs deterministic
/// regardless of how resources happen to be enumerated.
struct SimEvent {
  Cycle time;
  std::uint64_t seq;
  ResourceId target;
  std::function<void()> payload;
};

/// Deterministic discrete-event kernel with cycle-resolution timestamps.
/// Strictly single-threaded; run several engines in parallel for sweeps.
class SimEngine {
 public:
  SimEngine() { add_resource("sim"); }

  ResourceId add_resource(std::string name) {
    names_.push_back(std::move(name));
    return static_cast<ResourceId>(names_.size() - 1);
  }
  const std::vector<std::string>& resource_names() const { return names_; }

  Cycle now() const { return now_; }

  void schedule(Cycle time, ResourceId target, std::function<void()> payload) {
    if (time < now_) throw SimError("cannot schedule an event into the past");
    queue_.push(SimEvent{time, next_seq_++, target, std::move(payload)});
  }
  void schedule(Cycle time, std::function<void()> payload) {
    schedule(time, 0, std::move(payload));
  }

  /// Processes events in (time, seq) order until the queue drains. Returns
  /// the final cycle count. The watchdog cap flags livelocked models.
  Cycle run_until_idle() {
    std::uint64_t processed = 0;
    while (!queue_.empty()) {
      SimEvent ev = std::move(const_cast<SimEvent&>(queue_.top()));
      queue_.pop();
      now_ = ev.time;
      ev.payload();
      if (++processed > max_events_) {
        throw SimError("event watchdog exceeded (" + std::to_string(max_events_) +
                       " events): a model is livelocked");
      }
    }
    return now_;
  }

  void set_max_events(std::uint64_t cap) { max_events_ = cap; }

  void note(ResourceId r, Phase p, Cycle start, Cycle end) { timeline_.add(r, p, start, end); }
  Timeline& timeline() { return timeline_; }
  const Timeline& timeline() const { return timeline_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::vector<std::string> names_;
  Timeline timeline_;
  Cycle now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t max_events_ = 100'000'000;
};

}  // namespace aimcsim
