#pragma once

#include <cstdint>
#include <map>
#include <utility>

#include "sfb/tensor.hpp"

namespace sfb {

struct EdgeCounters {
  std::uint64_t values = 0;
  std::uint64_t bytes = 0;
  std::uint64_t messages = 0;
  friend bool operator==(const EdgeCounters&, const EdgeCounters&) = default;
};

/// Traffic counted at the sender. values counts f64 entries on the wire;
/// bytes counts encoded message lengths (framing excluded).
struct CommCounters {
  EdgeCounters total;
  std::map<std::pair<WorkerId, WorkerId>, EdgeCounters> edges;

  void record(WorkerId from, WorkerId to, std::uint64_t values, std::uint64_t bytes);
  void merge(const CommCounters& other);
};

enum class CommMode { kSfbFull, kSfbHalton, kFms };

/// Values per iteration: P(P-1)K(J+D) for full broadcast, PQK(J+D) for
/// Halton, 2PJD for full-matrix synchronization. Exact for dense pairs.
std::uint64_t expected_comm_values(CommMode mode, std::uint64_t workers, std::uint64_t minibatch,
                                   std::uint64_t rows, std::uint64_t cols, std::uint64_t fanout = 0);

}  // namespace sfb
