#pragma once

#include <condition_variable>
#include <cstdint>
#include <limits>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "sfb/tensor.hpp"

namespace sfb {

/// Staleness bound s. Zero is BSP, infinity is ASP, anything else SSP.
class Staleness {
 public:
  constexpr Staleness() = default;
  constexpr explicit Staleness(std::uint64_t s) : value_(s) {}
  static constexpr Staleness infinite() {
    Staleness s;
    s.value_ = std::numeric_limits<std::uint64_t>::max();
    return s;
  }
  /// "inf" / "asp" or a non-negative integer.
  static Staleness parse(std::string_view text);

  constexpr bool is_infinite() const { return value_ == std::numeric_limits<std::uint64_t>::max(); }
  constexpr std::uint64_t value() const { return value_; }
  std::string to_string() const;

  friend constexpr bool operator==(Staleness, Staleness) = default;

 private:
  std::uint64_t value_ = 0;
};

/// Vector clock of one worker: its own committed iteration count and, per
/// tracked peer, the number of that peer's iterations received and applied.
/// Only peers that send to this worker are tracked.
class ClockTable {
 public:
  ClockTable() = default;
  ClockTable(WorkerId self, std::size_t workers, std::vector<WorkerId> tracked_peers);

  WorkerId self() const { return self_; }
  std::size_t workers() const { return workers_; }
  std::uint64_t own_clock() const { return own_; }
  /// Applied iteration count from peer q; 0 for untracked peers.
  std::uint64_t received(WorkerId q) const;
  const std::vector<WorkerId>& tracked_peers() const { return peers_; }
  bool tracks(WorkerId q) const;

  void record_commit() { ++own_; }
  /// Raises tau[q] to upto_clock. Throws FifoViolation when upto_clock is
  /// below the current value and std::out_of_range for untracked peers.
  void record_applied(WorkerId q, std::uint64_t upto_clock);
  /// Exempts a peer from gating (its stream has ended).
  void retire(WorkerId q);

  /// max over gating peers of (own - tau[q]), saturating at 0.
  std::uint64_t max_gap() const;

 private:
  std::size_t slot(WorkerId q) const;

  WorkerId self_ = 0;
  std::size_t workers_ = 1;
  std::uint64_t own_ = 0;
  std::vector<WorkerId> peers_;
  std::vector<std::uint64_t> tau_;
  std::vector<bool> retired_;
};

/// True iff own - tau[q] <= s for every gating peer.
bool may_proceed(const ClockTable& clocks, Staleness s);

/// ClockTable shared between a worker's compute and apply roles. The compute
/// role parks on the condition until the gate opens; the apply role wakes it
/// after every applied drain.
class SharedClock {
 public:
  explicit SharedClock(ClockTable table) : table_(std::move(table)) {}

  /// Blocks until may_proceed and the worker's own batches are all applied,
  /// or until stop() is called. Returns false if stopped.
  bool wait_ready(Staleness s);
  void record_commit();
  void record_own_applied(std::uint64_t clock);
  void record_applied(WorkerId q, std::uint64_t clock);
  void retire(WorkerId q);
  void stop();

  ClockTable snapshot() const;
  std::uint64_t own_applied() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  ClockTable table_;
  std::uint64_t own_applied_ = 0;
  bool stopped_ = false;
};

}  // namespace sfb
