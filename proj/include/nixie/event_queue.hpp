#pragma once

#include <functional>
#include <queue>
#include <vector>

#include "nixie/units.hpp"

namespace nixie {

// Deterministic discrete-event clock: ties broken by insertion order.
class EventQueue {
 public:
  void at(Seconds t, std::function<void()> fn) {
    heap_.push(Entry{t, seq_++, std::move(fn)});
  }

  void after(Seconds dt, std::function<void()> fn) { at(now_ + dt, std::move(fn)); }

  Seconds now() const { return now_; }
  bool empty() const { return heap_.empty(); }

  bool run_one() {
    if (heap_.empty()) return false;
    Entry e = std::move(const_cast<Entry&>(heap_.top()));
    heap_.pop();
    now_ = e.time;
    e.fn();
    return true;
  }

  // Runs events with time ≤ horizon; later events are dropped.
  void run_until(Seconds horizon) {
    while (!heap_.empty() && heap_.top().time <= horizon) run_one();
    while (!heap_.empty()) heap_.pop();
    now_ = horizon;
  }

  void run_all() {
    while (run_one()) {
    }
  }

 private:
  struct Entry {
    Seconds time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t seq_ = 0;
  Seconds now_ = 0;
};

}  // namespace nixie
