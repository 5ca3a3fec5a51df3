#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "sfb/consistency.hpp"
#include "sfb/error.hpp"
#include "sfb/rng.hpp"

using namespace sfb;

namespace {

ClockTable table_with(std::uint64_t own, std::vector<std::uint64_t> tau) {
  std::vector<WorkerId> peers;
  for (std::size_t q = 0; q < tau.size(); ++q) peers.push_back(static_cast<WorkerId>(q + 1));
  ClockTable t(0, tau.size() + 1, peers);
  for (std::uint64_t i = 0; i < own; ++i) t.record_commit();
  for (std::size_t q = 0; q < tau.size(); ++q) t.record_applied(peers[q], tau[q]);
  return t;
}

}  // namespace

TEST(MayProceed, Examples) {
  EXPECT_FALSE(may_proceed(table_with(3, {3, 2}), Staleness(0)));
  EXPECT_TRUE(may_proceed(table_with(5, {4, 4}), Staleness(3)));
  EXPECT_TRUE(may_proceed(table_with(100, {0, 0}), Staleness::infinite()));
  EXPECT_TRUE(may_proceed(table_with(3, {3, 3}), Staleness(0)));
}

TEST(MayProceed, MatchesInequalityOnRandomTables) {
  Rng rng(12);
  for (int t = 0; t < 2000; ++t) {
    const auto own = rng.index(20);
    std::vector<std::uint64_t> tau(3);
    for (auto& x : tau) x = rng.index(own + 3);
    const Staleness s(rng.index(5));
    bool want = true;
    for (auto x : tau) want = want && (own <= x || own - x <= s.value());
    EXPECT_EQ(may_proceed(table_with(own, tau), s), want);
  }
}

TEST(ClockTable, CommitAndApply) {
  ClockTable t(1, 3, {0, 2});
  EXPECT_EQ(t.own_clock(), 0u);
  t.record_commit();
  EXPECT_EQ(t.own_clock(), 1u);
  t.record_applied(0, 5);
  t.record_applied(0, 5);
  EXPECT_EQ(t.received(0), 5u);
  EXPECT_THROW(t.record_applied(0, 4), FifoViolation);
  EXPECT_EQ(t.received(0), 5u);
  EXPECT_THROW(t.record_applied(1, 1), std::out_of_range);
  EXPECT_FALSE(t.tracks(1));
  EXPECT_EQ(t.received(1), 0u);
}

TEST(ClockTable, UntrackedPeersDoNotGate) {
  ClockTable t(0, 4, {2});
  for (int i = 0; i < 3; ++i) t.record_commit();
  t.record_applied(2, 3);
  EXPECT_TRUE(may_proceed(t, Staleness(0)));
  EXPECT_EQ(t.max_gap(), 0u);
}

TEST(ClockTable, RetiredPeerStopsGating) {
  auto t = table_with(4, {1});
  EXPECT_FALSE(may_proceed(t, Staleness(1)));
  t.retire(1);
  EXPECT_TRUE(may_proceed(t, Staleness(1)));
}

TEST(Staleness, Parse) {
  EXPECT_EQ(Staleness::parse("0"), Staleness(0));
  EXPECT_EQ(Staleness::parse("12"), Staleness(12));
  EXPECT_TRUE(Staleness::parse("inf").is_infinite());
  EXPECT_TRUE(Staleness::parse("asp").is_infinite());
  EXPECT_EQ(Staleness::infinite().to_string(), "inf");
  EXPECT_THROW(Staleness::parse("-1"), ConfigError);
  EXPECT_THROW(Staleness::parse("x"), ConfigError);
}

TEST(SharedClock, ComputeRoleParksUntilApplied) {
  SharedClock clock(ClockTable(0, 2, {1}));
  ASSERT_TRUE(clock.wait_ready(Staleness(0)));
  clock.record_commit();
  clock.record_own_applied(1);
  std::atomic<bool> woke{false};
  std::thread waiter([&] {
    EXPECT_TRUE(clock.wait_ready(Staleness(0)));
    woke = true;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  EXPECT_FALSE(woke.load());
  clock.record_applied(1, 1);
  waiter.join();
  EXPECT_TRUE(woke.load());
}

TEST(SharedClock, StopReleasesWaiter) {
  SharedClock clock(ClockTable(0, 2, {1}));
  clock.record_commit();
  clock.record_own_applied(1);
  std::thread waiter([&] { EXPECT_FALSE(clock.wait_ready(Staleness(0))); });
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  clock.stop();
  waiter.join();
}
