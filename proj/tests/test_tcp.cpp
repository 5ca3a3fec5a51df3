#include <gtest/gtest.h>

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <sstream>

#include "sfb/codec.hpp"
#include "sfb/error.hpp"
#include "sfb/tcp_mesh.hpp"

using namespace sfb;
using namespace std::chrono_literals;

namespace {

struct Inbox {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::pair<WorkerId, Bytes>> frames;
  int closed = 0;
  std::exception_ptr error;

  TcpMesh::FrameHandler frame_handler() {
    return [this](WorkerId from, Bytes b) {
      std::lock_guard lock(mu);
      frames.emplace_back(from, std::move(b));
      cv.notify_all();
    };
  }
  TcpMesh::CloseHandler close_handler() {
    return [this](WorkerId, std::exception_ptr e) {
      std::lock_guard lock(mu);
      ++closed;
      if (e) error = e;
      cv.notify_all();
    };
  }
  bool wait_for(std::size_t n, std::chrono::milliseconds limit) {
    std::unique_lock lock(mu);
    return cv.wait_for(lock, limit, [&] { return frames.size() >= n; });
  }
};

Bytes message_bytes(std::uint64_t clock) {
  SFMessage m;
  m.sender = 0;
  m.clock = clock;
  m.coeff = 0.5;
  if (clock % 2 == 0) {
    m.pairs.push_back({Vec64::dense({1.0, 2.0, 3.0}), Vec64::sparse(40, {3, 9}, {1.0, -1.0})});
  } else {
    m.pairs.push_back({Vec64::sparse(40, {39}, {2.0}), Vec64::dense({0.25})});
  }
  return encode(m);
}

}  // namespace

TEST(Peers, ParseFile) {
  std::istringstream in("# mesh\n0 127.0.0.1:7000\n\n1 localhost:7001\n");
  const auto peers = parse_peers(in);
  ASSERT_EQ(peers.size(), 2u);
  EXPECT_EQ(peers[0], (PeerAddress{0, "127.0.0.1", 7000}));
  EXPECT_EQ(peers[1], (PeerAddress{1, "localhost", 7001}));
  for (const char* bad : {"0 host\n", "x host:1\n", "0 host:99999\n", "0 a:1\n0 b:2\n"}) {
    std::istringstream b(bad);
    EXPECT_THROW(parse_peers(b), ConfigError) << bad;
  }
}

TEST(TcpMesh, HundredMessagesInOrder) {
  const auto peers = loopback_peers(2);
  Inbox inbox;
  TcpMesh rx(1, peers);
  TcpMesh tx(0, peers);
  rx.start_receiving(1, inbox.frame_handler(), inbox.close_handler());
  const WorkerId target = 1;
  tx.connect({&target, 1});
  for (std::uint64_t c = 1; c <= 100; ++c) tx.send(1, message_bytes(c));
  tx.close_outgoing();
  rx.wait_receivers();
  ASSERT_EQ(inbox.frames.size(), 100u);
  for (std::uint64_t c = 1; c <= 100; ++c) {
    EXPECT_EQ(inbox.frames[c - 1].first, 0u);
    EXPECT_EQ(decode(inbox.frames[c - 1].second).clock, c);
    EXPECT_EQ(inbox.frames[c - 1].second, message_bytes(c));
  }
  EXPECT_EQ(inbox.closed, 1);
  EXPECT_FALSE(inbox.error);
}

TEST(TcpMesh, KilledReceiverSurfacesTransportError) {
  const auto peers = loopback_peers(2);
  Inbox inbox;
  auto rx = std::make_unique<TcpMesh>(1, peers);
  TcpOptions opts;
  opts.io_timeout = 2000ms;
  TcpMesh tx(0, peers, opts);
  rx->start_receiving(1, inbox.frame_handler(), inbox.close_handler());
  const WorkerId target = 1;
  tx.connect({&target, 1});
  tx.send(1, message_bytes(1));
  ASSERT_TRUE(inbox.wait_for(1, 5000ms));
  rx.reset();
  const Bytes big(1 << 16, 0xab);
  const auto start = std::chrono::steady_clock::now();
  bool raised = false;
  try {
    for (int i = 0; i < 100000; ++i) tx.send(1, big);
  } catch (const TransportError&) {
    raised = true;
  }
  EXPECT_TRUE(raised);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
}

TEST(TcpMesh, UnreachablePeerFailsAfterDeadline) {
  const auto peers = loopback_peers(2);
  TcpOptions opts;
  opts.connect_deadline = 300ms;
  TcpMesh tx(0, peers, opts);
  const WorkerId target = 1;
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(tx.connect({&target, 1}), TransportError);
  const auto took = std::chrono::steady_clock::now() - start;
  EXPECT_GE(took, 250ms);
  EXPECT_LT(took, 5s);
}

TEST(TcpMesh, MissingInboundStreamReportedOnDeadline) {
  const auto peers = loopback_peers(2);
  TcpOptions opts;
  opts.connect_deadline = 200ms;
  Inbox inbox;
  TcpMesh rx(1, peers, opts);
  rx.start_receiving(1, inbox.frame_handler(), inbox.close_handler());
  rx.wait_receivers();
  EXPECT_TRUE(inbox.error);
}

TEST(TcpMesh, SendWithoutConnectionThrows) {
  const auto peers = loopback_peers(2);
  TcpMesh tx(0, peers);
  EXPECT_THROW(tx.send(1, Bytes{1}), TransportError);
}
