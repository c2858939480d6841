#include "saflbench/event_queue.hpp"

namespace saflbench {

bool EventQueue::Later::operator()(const Event& a, const Event& b) const noexcept {
  if (a.time != b.time) {
    return a.time > b.time;
  }
  if (a.kind != b.kind) {
    return a.kind > b.kind;
  }
  return a.sequence > b.sequence;
}

std::uint64_t EventQueue::push(double time, EventKind kind, int client_id,
                               std::size_t slot) {
  const std::uint64_t sequence = next_sequence_++;
  heap_.push(Event{time, kind, sequence, client_id, slot});
  return sequence;
}

Event EventQueue::pop() {
  Event e = heap_.top();
  heap_.pop();
  now_ = e.time;
  return e;
}

}  // namespace saflbench
