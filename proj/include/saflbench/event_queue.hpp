#pragma once

#include <cstdint>
#include <queue>
#include <vector>

namespace saflbench {

// Events sharing a timestamp run in this order: all uploads land, then the
// server checks its buffer, then broadcasts are delivered, then clients start
// their next local round.
enum class EventKind : std::uint8_t {
  UploadArrives = 0,
  AggregationCheck = 1,
  BroadcastArrives = 2,
  LocalRoundStart = 3,
};

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::UploadArrives;
  std::uint64_t sequence = 0;
  int client_id = -1;
  std::size_t slot = 0;  // upload payload slot or broadcast round
};

// Min-queue ordered by (time, kind, sequence). The sequence number is a
// global counter stamped at push, so ordering is total and deterministic.
class EventQueue {
 public:
  // Returns the sequence number stamped on the new event.
  std::uint64_t push(double time, EventKind kind, int client_id,
                     std::size_t slot = 0);
  Event pop();
  const Event& top() const { return heap_.top(); }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }
  // Time of the most recently popped event.
  double now() const noexcept { return now_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept;
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
  double now_ = 0.0;
};

}  // namespace saflbench
