#include "sfb/topology.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "sfb/error.hpp"

namespace sfb {

std::string_view to_string(TopologyKind kind) { return kind == TopologyKind::kFull ? "full" : "halton"; }

TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "full") return TopologyKind::kFull;
  if (name == "halton") return TopologyKind::kHalton;
  throw ConfigError("unknown topology '" + std::string(name) + "'");
}

namespace {

/// Calls visit(offset) along the base-2 Halton walk until it returns false.
/// Level m contributes floor(P * k / 2^m) for odd k < 2^m; once 2^m >= P a
/// level covers every residue, so the walk always reaches every offset.
template <class F>
void walk_halton(std::size_t workers, F&& visit) {
  for (unsigned level = 1; level < 63; ++level) {
    const std::size_t denom = std::size_t{1} << level;
    for (std::size_t k = 1; k < denom; k += 2) {
      if (!visit((workers * k) >> level)) return;
    }
    if (denom > 2 * workers) return;
  }
}

}  // namespace

std::vector<std::size_t> halton_offsets(std::size_t workers, std::size_t count) {
  std::vector<std::size_t> out;
  if (count == 0) return out;
  walk_halton(workers, [&](std::size_t off) {
    if (off != 0 && off < workers && std::find(out.begin(), out.end(), off) == out.end()) {
      out.push_back(off);
    }
    return out.size() < count;
  });
  return out;
}

std::size_t default_halton_fanout(std::size_t workers) {
  std::size_t q = 0;
  while ((std::size_t{1} << q) < workers) ++q;
  return std::max<std::size_t>(1, q);
}

Topology Topology::full(std::size_t workers) {
  if (workers == 0) throw ConfigError("topology needs at least one worker");
  return Topology(TopologyKind::kFull, workers);
}

Topology Topology::halton(std::size_t workers, std::size_t fanout) {
  if (workers < 2) throw ConfigError("Halton topology needs at least two workers");
  if (fanout < 1 || fanout > workers - 1) {
    throw ConfigError("Halton fanout Q=" + std::to_string(fanout) + " must lie in [1, P-1] for P=" +
                      std::to_string(workers));
  }
  Topology t(TopologyKind::kHalton, workers);
  t.offsets_ = halton_offsets(workers, fanout);

  std::size_t g = workers;
  for (auto off : t.offsets_) g = std::gcd(g, off);
  if (g != 1) {
    std::size_t head = workers;
    for (std::size_t i = 0; i + 1 < t.offsets_.size(); ++i) head = std::gcd(head, t.offsets_[i]);
    std::size_t replacement = 0;
    walk_halton(workers, [&](std::size_t off) {
      if (off != 0 && off < workers && std::gcd(head, off) == 1) {
        replacement = off;
        return false;
      }
      return true;
    });
    t.offsets_.back() = replacement;
  }
  return t;
}

std::size_t Topology::fanout() const {
  return kind_ == TopologyKind::kFull ? workers_ - 1 : offsets_.size();
}

std::vector<WorkerId> Topology::targets(WorkerId p) const {
  if (p >= workers_) throw std::out_of_range("targets: worker id out of range");
  std::vector<WorkerId> out;
  if (kind_ == TopologyKind::kFull) {
    for (std::size_t q = 0; q < workers_; ++q) {
      if (q != p) out.push_back(static_cast<WorkerId>(q));
    }
    return out;
  }
  for (auto off : offsets_) out.push_back(static_cast<WorkerId>((p + off) % workers_));
  return out;
}

std::vector<WorkerId> Topology::sources(WorkerId p) const {
  if (p >= workers_) throw std::out_of_range("sources: worker id out of range");
  std::vector<WorkerId> out;
  if (kind_ == TopologyKind::kFull) return targets(p);
  for (auto off : offsets_) out.push_back(static_cast<WorkerId>((p + workers_ - off) % workers_));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sfb
