#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "streamrag/types.hpp"

namespace streamrag {

/// Deterministic virtual clock with a pending-event queue.
///
/// Events fire in nondecreasing time; events scheduled for the same instant
/// fire in insertion order. `now()` never decreases.
template <typename Event>
class SimClock {
 public:
  struct Scheduled {
    Millis fire_at_ms;
    std::uint64_t seq;
    Event event;
  };

  Millis now() const noexcept { return now_ms_; }
  bool empty() const noexcept { return queue_.empty(); }
  std::size_t pending() const noexcept { return queue_.size(); }

  std::optional<Millis> next_fire_time() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.top().fire_at_ms;
  }

  void schedule(Millis fire_at_ms, Event event) {
    if (fire_at_ms < now_ms_) {
      throw std::logic_error("SimClock: cannot schedule an event in the past");
    }
    queue_.push(Scheduled{fire_at_ms, next_seq_++, std::move(event)});
  }

  void schedule_after(Millis delay_ms, Event event) {
    if (delay_ms < 0) throw std::logic_error("SimClock: negative delay");
    schedule(now_ms_ + delay_ms, std::move(event));
  }

  /// Pops every event with fire_at_ms <= until_ms, in order, and sets the
  /// clock to until_ms.
  std::vector<Scheduled> advance(Millis until_ms) {
    if (until_ms < now_ms_) {
      throw std::logic_error("SimClock: cannot advance backwards");
    }
    std::vector<Scheduled> fired;
    while (!queue_.empty() && queue_.top().fire_at_ms <= until_ms) {
      fired.push_back(pop_top());
    }
    now_ms_ = until_ms;
    return fired;
  }

  /// Pops the single earliest event and moves the clock to its time.
  std::optional<Scheduled> step() {
    if (queue_.empty()) return std::nullopt;
    Scheduled s = pop_top();
    now_ms_ = s.fire_at_ms;
    return s;
  }

 private:
  struct Later {
    bool operator()(const Scheduled& a, const Scheduled& b) const noexcept {
      if (a.fire_at_ms != b.fire_at_ms) return a.fire_at_ms > b.fire_at_ms;
      return a.seq > b.seq;
    }
  };

  Scheduled pop_top() {
    // priority_queue::top is const; the element is discarded right after.
    Scheduled s = std::move(const_cast<Scheduled&>(queue_.top()));
    queue_.pop();
    return s;
  }

  Millis now_ms_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Scheduled, std::vector<Scheduled>, Later> queue_;
};

}  // namespace streamrag
