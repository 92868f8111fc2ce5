#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace sbpnet {

// Binary-heap event calendar with lazy invalidation. Each event belongs to a
// key (a station or an arrival stream); at most one event per key is live.
// Rescheduling or cancelling a key bumps its version, and entries with a stale
// version are discarded when they reach the top. Ties in time pop in
// scheduling order.
template <typename Payload>
class EventCalendar {
 public:
  struct Event {
    double time;
    std::uint32_t key;
    Payload payload;
  };

  explicit EventCalendar(std::size_t num_keys) : version_(num_keys, 0), live_(num_keys, false) {}

  void schedule(std::uint32_t key, double time, Payload payload) {
    const std::uint32_t v = ++version_[key];
    live_[key] = true;
    heap_.push_back({time, seq_++, key, v, payload});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
  }

  void cancel(std::uint32_t key) {
    ++version_[key];
    live_[key] = false;
  }

  bool pending(std::uint32_t key) const { return live_[key]; }

  // Next live event, or false when none remain.
  bool pop(Event& out) {
    while (!heap_.empty()) {
      std::pop_heap(heap_.begin(), heap_.end(), Later{});
      const Entry e = heap_.back();
      heap_.pop_back();
      if (e.version != version_[e.key]) continue;
      live_[e.key] = false;
      out = {e.time, e.key, e.payload};
      return true;
    }
    return false;
  }

  // Entries physically held, stale ones included.
  std::size_t heap_size() const { return heap_.size(); }

 private:
  struct Entry {
    double time;
    std::uint64_t seq;
    std::uint32_t key;
    std::uint32_t version;
    Payload payload;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time > b.time || (a.time == b.time && a.seq > b.seq);
    }
  };

  std::vector<Entry> heap_;
  std::vector<std::uint32_t> version_;
  std::vector<bool> live_;
  std::uint64_t seq_ = 0;
};

}  // namespace sbpnet
