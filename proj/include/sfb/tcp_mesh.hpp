#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sfb/codec.hpp"

namespace sfb {

struct PeerAddress {
  WorkerId id = 0;
  std::string host;
  std::uint16_t port = 0;
  friend bool operator==(const PeerAddress&, const PeerAddress&) = default;
};

/// Peer config: one `worker_id host:port` line per worker; '#' comments.
std::vector<PeerAddress> parse_peers(std::istream& in);
std::vector<PeerAddress> load_peers(const std::filesystem::path& path);
/// 127.0.0.1 addresses on currently free ephemeral ports.
std::vector<PeerAddress> loopback_peers(std::size_t workers);

struct TcpOptions {
  std::chrono::milliseconds connect_deadline{10'000};
  std::chrono::milliseconds initial_backoff{5};
  std::chrono::milliseconds max_backoff{250};
  /// Limit on a single stalled send.
  std::chrono::milliseconds io_timeout{30'000};
};

/// One worker's endpoint of the peer mesh: a listening socket for inbound
/// edges and one outgoing stream per broadcast target. Each directed edge is
/// its own ordered byte stream, so per-edge FIFO follows from TCP ordering.
/// Frames are u32 length-prefixed payloads; a connection opens with an
/// 8-byte handshake ("SFBH" + sender id).
///
/// The listen address is the worker's own peer entry, or $SFB_BIND if set.
class TcpMesh {
 public:
  using FrameHandler = std::function<void(WorkerId from, Bytes payload)>;
  /// Called once per inbound stream; error is null on a clean end of stream.
  using CloseHandler = std::function<void(WorkerId from, std::exception_ptr error)>;

  TcpMesh(WorkerId self, std::vector<PeerAddress> peers, TcpOptions options = {});
  ~TcpMesh();
  TcpMesh(const TcpMesh&) = delete;
  TcpMesh& operator=(const TcpMesh&) = delete;

  WorkerId self() const { return self_; }
  std::uint16_t port() const { return port_; }

  /// Accepts one inbound stream per expected source in the background.
  void start_receiving(std::size_t expected_sources, FrameHandler on_frame, CloseHandler on_close);
  /// Connects to every target, retrying with backoff until the deadline.
  void connect(std::span<const WorkerId> targets);
  /// Throws TransportError when the stream is broken or stalls.
  void send(WorkerId to, std::span<const std::uint8_t> payload);
  /// Ends all outgoing streams; receivers see a clean end of stream.
  void close_outgoing();
  /// Joins the accept and receiver threads.
  void wait_receivers();
  /// Closes every socket; blocked receivers return with an error.
  void shutdown();

 private:
  void accept_loop(std::size_t expected);
  void receive_loop(int fd);
  const PeerAddress& address_of(WorkerId id) const;

  WorkerId self_;
  std::vector<PeerAddress> peers_;
  TcpOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;

  FrameHandler on_frame_;
  CloseHandler on_close_;
  std::thread accept_thread_;
  std::mutex threads_mu_;
  std::vector<std::thread> receivers_;
  std::vector<int> inbound_fds_;
  std::atomic<bool> stopping_{false};

  std::mutex send_mu_;
  std::map<WorkerId, int> outgoing_;
};

}  // namespace sfb
