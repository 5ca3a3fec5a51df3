#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "sfb/error.hpp"
#include "sfb/topology.hpp"

using namespace sfb;

TEST(Halton, SixWorkerExamples) {
  const auto t = Topology::halton(6, 2);
  EXPECT_EQ(t.targets(0), (std::vector<WorkerId>{3, 1}));
  EXPECT_EQ(t.targets(4), (std::vector<WorkerId>{1, 5}));
}

TEST(Halton, TwoWorkers) { EXPECT_EQ(Topology::halton(2, 1).targets(0), (std::vector<WorkerId>{1})); }

TEST(Halton, OffsetWalk) {
  EXPECT_EQ(halton_offsets(16, 7), (std::vector<std::size_t>{8, 4, 12, 2, 6, 10, 14}));
  // P = 3: floor(3/4) = 0 is skipped.
  const auto small = halton_offsets(3, 2);
  EXPECT_EQ(small.size(), 2u);
  EXPECT_EQ(small[0], 1u);
  EXPECT_TRUE(std::find(small.begin(), small.end(), 0u) == small.end());
}

TEST(Halton, FanoutDefaultAndBounds) {
  EXPECT_EQ(default_halton_fanout(1), 1u);
  EXPECT_EQ(default_halton_fanout(2), 1u);
  EXPECT_EQ(default_halton_fanout(6), 3u);
  EXPECT_EQ(default_halton_fanout(64), 6u);
  EXPECT_EQ(default_halton_fanout(65), 7u);
  EXPECT_THROW(Topology::halton(4, 4), ConfigError);
  EXPECT_THROW(Topology::halton(4, 0), ConfigError);
}

TEST(Full, AllOthers) {
  const auto t = Topology::full(4);
  EXPECT_EQ(t.targets(2), (std::vector<WorkerId>{0, 1, 3}));
  EXPECT_EQ(t.sources(2), (std::vector<WorkerId>{0, 1, 3}));
  EXPECT_EQ(t.fanout(), 3u);
}

TEST(Halton, StructuralPropertiesAllSizes) {
  for (std::size_t p = 2; p <= 64; ++p) {
    for (std::size_t q = 1; q <= std::min<std::size_t>(p - 1, 8); ++q) {
      const auto t = Topology::halton(p, q);
      std::vector<std::vector<WorkerId>> adj(p);
      const auto base = t.targets(0);
      for (std::size_t w = 0; w < p; ++w) {
        const auto tgt = t.targets(static_cast<WorkerId>(w));
        ASSERT_EQ(tgt.size(), q);
        EXPECT_EQ(std::set<WorkerId>(tgt.begin(), tgt.end()).size(), q);
        EXPECT_TRUE(std::find(tgt.begin(), tgt.end(), w) == tgt.end());
        for (std::size_t k = 0; k < q; ++k) EXPECT_EQ(tgt[k], (base[k] + w) % p);
        adj[w] = tgt;
      }
      EXPECT_TRUE(oracle::strongly_connected(adj)) << "P=" << p << " Q=" << q;
      for (std::size_t w = 0; w < p; ++w) {
        std::vector<WorkerId> from;
        for (std::size_t v = 0; v < p; ++v)
          if (std::find(adj[v].begin(), adj[v].end(), w) != adj[v].end()) from.push_back(static_cast<WorkerId>(v));
        EXPECT_EQ(t.sources(static_cast<WorkerId>(w)), from);
      }
    }
  }
}

TEST(Halton, ConnectivityRepairOnlyWhenNeeded) {
  // P=8, Q=3: walk gives {4, 2, 6}, all even.
  const auto t = Topology::halton(8, 3);
  EXPECT_EQ(t.offsets()[0], 4u);
  EXPECT_EQ(t.offsets()[1], 2u);
  EXPECT_EQ(std::gcd(std::gcd(t.offsets()[0], t.offsets()[1]), std::gcd(t.offsets()[2], std::size_t{8})), 1u);
  EXPECT_EQ(Topology::halton(6, 2).offsets(), (std::vector<std::size_t>{3, 1}));
}

TEST(TopologyKind, Parse) {
  EXPECT_EQ(parse_topology_kind("halton"), TopologyKind::kHalton);
  EXPECT_EQ(parse_topology_kind("full"), TopologyKind::kFull);
  EXPECT_THROW(parse_topology_kind("ring"), ConfigError);
}
