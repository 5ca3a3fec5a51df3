#include "sfb/tcp_mesh.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sfb/error.hpp"

namespace sfb {

namespace {

constexpr std::uint8_t kHandshake[4] = {'S', 'F', 'B', 'H'};
constexpr std::uint32_t kMaxFrame = 1u << 30;

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (host.empty() || host == "*" || host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

// Receives block without a timeout: a slow peer is not an error, and
// shutdown() unblocks them.
void set_send_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

void send_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TransportError("send stalled past io timeout");
      throw TransportError(errno_text("send"));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

/// False on a clean end of stream before the first byte.
bool recv_all(int fd, std::uint8_t* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd, data + got, n - got, 0);
    if (k == 0) {
      if (got == 0) return false;
      throw TransportError("stream ended mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"));
    }
    got += static_cast<std::size_t>(k);
  }
  return true;
}

std::uint32_t load_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
  return v;
}

}  // namespace

std::vector<PeerAddress> parse_peers(std::istream& in) {
  std::vector<PeerAddress> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string id_text;
    std::string endpoint;
    if (!(ls >> id_text)) continue;
    long id = -1;
    const auto [end, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc{} || end != id_text.data() + id_text.size() || !(ls >> endpoint) || id < 0) {
      throw ConfigError("peers line " + std::to_string(line_no) + ": expected 'worker_id host:port'");
    }
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos) throw ConfigError("peers line " + std::to_string(line_no) + ": missing port");
    const long port = std::strtol(endpoint.c_str() + colon + 1, nullptr, 10);
    if (port <= 0 || port > 65535) throw ConfigError("peers line " + std::to_string(line_no) + ": bad port");
    out.push_back({static_cast<WorkerId>(id), endpoint.substr(0, colon), static_cast<std::uint16_t>(port)});
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = i + 1; j < out.size(); ++j) {
      if (out[i].id == out[j].id) throw ConfigError("peers: duplicate worker id " + std::to_string(out[i].id));
    }
  }
  return out;
}

std::vector<PeerAddress> load_peers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open peers file " + path.string());
  return parse_peers(in);
}

std::vector<PeerAddress> loopback_peers(std::size_t workers) {
  std::vector<PeerAddress> out;
  std::vector<int> held;
  for (std::size_t p = 0; p < workers; ++p) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(errno_text("socket"));
    auto addr = resolve("127.0.0.1", 0);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd);
      throw TransportError(errno_text("bind"));
    }
    socklen_t len = sizeof addr;
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    out.push_back({static_cast<WorkerId>(p), "127.0.0.1", ntohs(addr.sin_port)});
    held.push_back(fd);
  }
  for (int fd : held) ::close(fd);
  return out;
}

TcpMesh::TcpMesh(WorkerId self, std::vector<PeerAddress> peers, TcpOptions options)
    : self_(self), peers_(std::move(peers)), options_(options) {
  const auto& me = address_of(self_);
  std::string host = me.host;
  if (const char* bind = std::getenv("SFB_BIND"); bind != nullptr && *bind != '\0') host = bind;

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(errno_text("socket"));
  int one = 1;
  setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  auto addr = resolve(host, me.port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const auto msg = errno_text("bind");
    ::close(listen_fd_);
    throw TransportError(msg + " (" + host + ":" + std::to_string(me.port) + ")");
  }
  if (::listen(listen_fd_, 128) != 0) {
    const auto msg = errno_text("listen");
    ::close(listen_fd_);
    throw TransportError(msg);
  }
  socklen_t len = sizeof addr;
  getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpMesh::~TcpMesh() {
  shutdown();
  wait_receivers();
}

const PeerAddress& TcpMesh::address_of(WorkerId id) const {
  for (const auto& p : peers_) {
    if (p.id == id) return p;
  }
  throw ConfigError("no peer address for worker " + std::to_string(id));
}

void TcpMesh::start_receiving(std::size_t expected_sources, FrameHandler on_frame, CloseHandler on_close) {
  on_frame_ = std::move(on_frame);
  on_close_ = std::move(on_close);
  accept_thread_ = std::thread([this, expected_sources] { accept_loop(expected_sources); });
}

void TcpMesh::accept_loop(std::size_t expected) {
  std::size_t accepted = 0;
  // Peers may start up to one connect deadline late and then retry for
  // another.
  const auto deadline = std::chrono::steady_clock::now() + 2 * options_.connect_deadline;
  while (accepted < expected && !stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, 50);
    if (r < 0 && errno != EINTR) break;
    if (std::chrono::steady_clock::now() > deadline) {
      if (on_close_) {
        on_close_(self_, std::make_exception_ptr(TransportError(
                             "worker " + std::to_string(self_) + ": only " + std::to_string(accepted) + " of " +
                             std::to_string(expected) + " peers connected before the deadline")));
      }
      break;
    }
    if (r <= 0 || (pfd.revents & POLLIN) == 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    set_send_timeout(fd, options_.io_timeout);
    std::lock_guard lock(threads_mu_);
    inbound_fds_.push_back(fd);
    receivers_.emplace_back([this, fd] { receive_loop(fd); });
    ++accepted;
  }
}

void TcpMesh::receive_loop(int fd) {
  WorkerId from = 0;
  try {
    std::uint8_t hello[8];
    if (!recv_all(fd, hello, 8)) throw TransportError("peer closed before handshake");
    if (std::memcmp(hello, kHandshake, 4) != 0) throw TransportError("bad handshake");
    from = load_u32(hello + 4);
    for (;;) {
      std::uint8_t head[4];
      if (!recv_all(fd, head, 4)) break;
      const auto n = load_u32(head);
      if (n > kMaxFrame) throw TransportError("frame length exceeds limit");
      Bytes payload(n);
      if (n > 0 && !recv_all(fd, payload.data(), n)) throw TransportError("stream ended mid-frame");
      on_frame_(from, std::move(payload));
    }
    if (on_close_) on_close_(from, nullptr);
  } catch (...) {
    if (on_close_) on_close_(from, stopping_.load() ? nullptr : std::current_exception());
  }
}

void TcpMesh::connect(std::span<const WorkerId> targets) {
  for (auto to : targets) {
    const auto& peer = address_of(to);
    const auto addr = resolve(peer.host, peer.port);
    const auto deadline = std::chrono::steady_clock::now() + options_.connect_deadline;
    auto backoff = options_.initial_backoff;
    int fd = -1;
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw TransportError(errno_text("socket"));
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) break;
      const auto err = errno_text("connect");
      ::close(fd);
      fd = -1;
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) {
        throw TransportError("worker " + std::to_string(self_) + " could not reach worker " +
                             std::to_string(to) + " at " + peer.host + ":" + std::to_string(peer.port) +
                             " before the deadline (" + err + ")");
      }
      std::this_thread::sleep_for(
          std::min<std::chrono::steady_clock::duration>(backoff, deadline - now));
      backoff = std::min(backoff * 2, options_.max_backoff);
    }
    set_send_timeout(fd, options_.io_timeout);
    std::uint8_t hello[8];
    std::memcpy(hello, kHandshake, 4);
    for (int i = 0; i < 4; ++i) hello[4 + i] = static_cast<std::uint8_t>(self_ >> (8 * i));
    try {
      send_all(fd, hello, 8);
    } catch (...) {
      ::close(fd);
      throw;
    }
    std::lock_guard lock(send_mu_);
    outgoing_[to] = fd;
  }
}

void TcpMesh::send(WorkerId to, std::span<const std::uint8_t> payload) {
  std::lock_guard lock(send_mu_);
  auto it = outgoing_.find(to);
  if (it == outgoing_.end()) throw TransportError("no connection to worker " + std::to_string(to));
  std::uint8_t head[4];
  const auto n = static_cast<std::uint32_t>(payload.size());
  for (int i = 0; i < 4; ++i) head[i] = static_cast<std::uint8_t>(n >> (8 * i));
  try {
    send_all(it->second, head, 4);
    send_all(it->second, payload.data(), payload.size());
  } catch (const TransportError& e) {
    throw TransportError("worker " + std::to_string(self_) + " -> " + std::to_string(to) + ": " + e.what());
  }
}

void TcpMesh::close_outgoing() {
  std::lock_guard lock(send_mu_);
  for (auto& [to, fd] : outgoing_) {
    ::shutdown(fd, SHUT_WR);
    ::close(fd);
  }
  outgoing_.clear();
}

void TcpMesh::wait_receivers() {
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> rs;
  {
    std::lock_guard lock(threads_mu_);
    rs.swap(receivers_);
  }
  for (auto& t : rs) t.join();
  std::lock_guard lock(threads_mu_);
  for (int fd : inbound_fds_) ::close(fd);
  inbound_fds_.clear();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void TcpMesh::shutdown() {
  // Safe from any thread, including this mesh's own receivers: nothing here
  // joins. The accept loop notices stopping_ on its next poll.
  stopping_.store(true);
  close_outgoing();
  std::lock_guard lock(threads_mu_);
  for (int fd : inbound_fds_) ::shutdown(fd, SHUT_RDWR);
}

}  // namespace sfb
