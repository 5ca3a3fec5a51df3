#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "sfb/tensor.hpp"

namespace sfb {

enum class TopologyKind { kFull, kHalton };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);

/// The first `count` nonzero Halton broadcast offsets for P workers:
/// floor(P/2), floor(P/4), floor(3P/4), floor(P/8), floor(3P/8), ...
/// Zero offsets (small P) are skipped and the walk continues.
std::vector<std::size_t> halton_offsets(std::size_t workers, std::size_t count);

/// max(1, ceil(log2 P)).
std::size_t default_halton_fanout(std::size_t workers);

/// Who each worker broadcasts to. Worker ids are 0-based internally.
///
/// Halton(Q) takes the first Q distinct nonzero offsets of the Halton walk.
/// Because every worker uses the same offsets, the broadcast graph is a
/// circulant and is strongly connected iff gcd(P, offsets...) == 1. When the
/// first Q offsets share a factor with P (P = 8, Q = 3 gives {4, 2, 6}), the
/// last slot is replaced by the earliest later offset in the walk that
/// restores gcd 1.
class Topology {
 public:
  static Topology full(std::size_t workers);
  static Topology halton(std::size_t workers, std::size_t fanout);

  TopologyKind kind() const { return kind_; }
  std::size_t workers() const { return workers_; }
  /// Targets per worker: P - 1 for full broadcast, Q for Halton.
  std::size_t fanout() const;
  /// Offsets in use (Halton only).
  const std::vector<std::size_t>& offsets() const { return offsets_; }

  /// Ordered broadcast targets of worker p; never contains p.
  std::vector<WorkerId> targets(WorkerId p) const;
  /// Workers that broadcast to p, ascending.
  std::vector<WorkerId> sources(WorkerId p) const;

 private:
  Topology(TopologyKind kind, std::size_t workers) : kind_(kind), workers_(workers) {}

  TopologyKind kind_;
  std::size_t workers_;
  std::vector<std::size_t> offsets_;
};

}  // namespace sfb
