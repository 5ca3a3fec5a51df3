#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "sfb/codec.hpp"
#include "sfb/rng.hpp"

namespace sfb {

/// Per-message delays in simulator steps.
///
/// A message sent at step t with delay d is delivered at step t + max(1, d):
/// delay 0 means "next step", the BSP timing. Per-edge FIFO order holds
/// regardless of the drawn delays.
class DelaySchedule {
 public:
  static DelaySchedule zero() { return DelaySchedule{}; }
  static DelaySchedule fixed(std::uint64_t delay);
  /// Independent uniform draws in [0, max_delay] from a seeded stream.
  static DelaySchedule random(std::uint64_t seed, std::uint64_t max_delay);

  /// Explicit delays for one edge, consumed in send order; the last entry
  /// repeats once the list is exhausted.
  DelaySchedule& set_edge(WorkerId from, WorkerId to, std::vector<std::uint64_t> delays);

  std::uint64_t next_delay(WorkerId from, WorkerId to);
  std::uint64_t max_delay() const;

 private:
  std::uint64_t fixed_ = 0;
  std::uint64_t random_max_ = 0;
  std::optional<Rng> rng_;
  struct EdgeList {
    std::vector<std::uint64_t> delays;
    std::size_t next = 0;
  };
  std::map<std::pair<WorkerId, WorkerId>, EdgeList> edges_;
};

struct Delivery {
  WorkerId from = 0;
  WorkerId to = 0;
  std::uint64_t sent_step = 0;
  std::uint64_t delivered_step = 0;
  std::uint64_t sequence = 0;
  Bytes payload;
};

/// Both directions of the trace: one record per send and per delivery.
struct TraceEvent {
  enum class Kind : std::uint8_t { kSend, kDeliver } kind;
  std::uint64_t step;
  WorkerId from;
  WorkerId to;
  std::uint64_t sequence;
  std::uint32_t payload_crc;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Deterministic single-threaded network between `workers` endpoints.
class SimNetwork {
 public:
  SimNetwork(std::size_t workers, DelaySchedule delays);

  std::uint64_t now() const { return now_; }
  std::size_t workers() const { return workers_; }

  /// Queues payload on edge from -> to at the current step.
  void send(WorkerId from, WorkerId to, Bytes payload);
  /// Advances the clock one step and returns the messages due, in global
  /// send order.
  std::vector<Delivery> step();

  bool idle() const { return in_flight_.empty(); }
  std::size_t in_flight() const { return in_flight_.size(); }

  const std::vector<TraceEvent>& trace() const { return trace_; }
  /// FNV-1a over the trace records.
  std::uint64_t trace_hash() const;

 private:
  struct Pending {
    std::uint64_t due;
    std::uint64_t sequence;
    Delivery delivery;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.due != b.due ? a.due > b.due : a.sequence > b.sequence;
    }
  };

  std::size_t workers_;
  DelaySchedule delays_;
  std::uint64_t now_ = 0;
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<Pending, std::vector<Pending>, Later> in_flight_;
  std::map<std::pair<WorkerId, WorkerId>, std::uint64_t> last_due_;
  std::vector<TraceEvent> trace_;
};

}  // namespace sfb
