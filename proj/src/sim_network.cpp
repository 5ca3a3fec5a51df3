#include "sfb/sim_network.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sfb {

DelaySchedule DelaySchedule::fixed(std::uint64_t delay) {
  DelaySchedule d;
  d.fixed_ = delay;
  return d;
}

DelaySchedule DelaySchedule::random(std::uint64_t seed, std::uint64_t max_delay) {
  DelaySchedule d;
  d.random_max_ = max_delay;
  d.rng_.emplace(seed);
  return d;
}

DelaySchedule& DelaySchedule::set_edge(WorkerId from, WorkerId to, std::vector<std::uint64_t> delays) {
  if (delays.empty()) throw std::invalid_argument("set_edge: empty delay list");
  edges_[{from, to}] = EdgeList{std::move(delays), 0};
  return *this;
}

std::uint64_t DelaySchedule::next_delay(WorkerId from, WorkerId to) {
  if (auto it = edges_.find({from, to}); it != edges_.end()) {
    auto& e = it->second;
    const auto d = e.delays[std::min(e.next, e.delays.size() - 1)];
    ++e.next;
    return d;
  }
  if (rng_) return rng_->index(random_max_ + 1);
  return fixed_;
}

std::uint64_t DelaySchedule::max_delay() const {
  std::uint64_t m = rng_ ? random_max_ : fixed_;
  for (const auto& [edge, list] : edges_) {
    m = std::max(m, *std::max_element(list.delays.begin(), list.delays.end()));
  }
  return m;
}

SimNetwork::SimNetwork(std::size_t workers, DelaySchedule delays)
    : workers_(workers), delays_(std::move(delays)) {}

void SimNetwork::send(WorkerId from, WorkerId to, Bytes payload) {
  if (from >= workers_ || to >= workers_) {
    throw std::out_of_range("sim_send: unknown worker id " + std::to_string(from >= workers_ ? from : to));
  }
  const auto delay = std::max<std::uint64_t>(1, delays_.next_delay(from, to));
  auto& last = last_due_[{from, to}];
  const auto due = std::max(now_ + delay, last);
  last = due;
  const auto seq = next_sequence_++;
  trace_.push_back({TraceEvent::Kind::kSend, now_, from, to, seq, crc32(payload)});
  in_flight_.push({due, seq, Delivery{from, to, now_, due, seq, std::move(payload)}});
}

std::vector<Delivery> SimNetwork::step() {
  ++now_;
  std::vector<Delivery> out;
  while (!in_flight_.empty() && in_flight_.top().due <= now_) {
    // priority_queue::top is const; the payload is moved out before pop.
    auto p = std::move(const_cast<Pending&>(in_flight_.top()));
    in_flight_.pop();
    trace_.push_back({TraceEvent::Kind::kDeliver, now_, p.delivery.from, p.delivery.to, p.sequence,
                      crc32(p.delivery.payload)});
    out.push_back(std::move(p.delivery));
  }
  return out;
}

std::uint64_t SimNetwork::trace_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : trace_) {
    mix(static_cast<std::uint64_t>(e.kind));
    mix(e.step);
    mix(e.from);
    mix(e.to);
    mix(e.sequence);
    mix(e.payload_crc);
  }
  return h;
}

}  // namespace sfb
