#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "rculab/buddy.hpp"
#include "rculab/clock.hpp"

namespace rculab {

enum class EventKind : std::uint8_t { Create, Unlink, Free, Oom, Uaf, Stale };

const char* event_kind_name(EventKind k);

struct Event {
  Tick tick = 0;
  EventKind kind = EventKind::Create;
  std::uint64_t key = 0;
  std::uint64_t pages = 0;
};

struct OomEvent {
  Tick tick = 0;
  unsigned requested_order = 0;
  std::uint64_t iteration = 0;  // filled by the harness
  FragReport report;
};

struct EventTotals {
  std::uint64_t creates = 0;
  std::uint64_t unlinks = 0;
  std::uint64_t frees = 0;
  std::uint64_t oom_events = 0;
  std::uint64_t uaf_hits = 0;
  std::uint64_t stale_hits = 0;
  std::uint64_t clean_hits = 0;
  std::uint64_t clean_misses = 0;
};

class EventLog {
 public:
  void record(Event e) {
    std::lock_guard<std::mutex> lock(mutex_);
    events_.push_back(e);
  }
  void record_oom(OomEvent e) {
    std::lock_guard<std::mutex> lock(mutex_);
    events_.push_back(Event{e.tick, EventKind::Oom, 0, 0});
    ooms_.push_back(std::move(e));
  }

  std::vector<Event> events() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return events_;
  }
  std::vector<OomEvent> oom_details() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return ooms_;
  }

  EventTotals tally() const {
    std::lock_guard<std::mutex> lock(mutex_);
    EventTotals t;
    for (const auto& e : events_) {
      switch (e.kind) {
        case EventKind::Create: ++t.creates; break;
        case EventKind::Unlink: ++t.unlinks; break;
        case EventKind::Free: ++t.frees; break;
        case EventKind::Oom: ++t.oom_events; break;
        case EventKind::Uaf: ++t.uaf_hits; break;
        case EventKind::Stale: ++t.stale_hits; break;
      }
    }
    return t;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
  std::vector<OomEvent> ooms_;
};

}  // namespace rculab
