#include "sfb/consistency.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "sfb/error.hpp"

namespace sfb {

Staleness Staleness::parse(std::string_view text) {
  if (text == "inf" || text == "infinity" || text == "asp") return infinite();
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size() || v == std::numeric_limits<std::uint64_t>::max()) {
    throw ConfigError("staleness must be a non-negative integer or 'inf', got '" + std::string(text) + "'");
  }
  return Staleness(v);
}

std::string Staleness::to_string() const { return is_infinite() ? "inf" : std::to_string(value_); }

ClockTable::ClockTable(WorkerId self, std::size_t workers, std::vector<WorkerId> tracked_peers)
    : self_(self), workers_(workers), peers_(std::move(tracked_peers)) {
  std::sort(peers_.begin(), peers_.end());
  peers_.erase(std::unique(peers_.begin(), peers_.end()), peers_.end());
  for (auto q : peers_) {
    if (q == self || q >= workers) throw std::invalid_argument("ClockTable: bad tracked peer id");
  }
  tau_.assign(peers_.size(), 0);
  retired_.assign(peers_.size(), false);
}

std::size_t ClockTable::slot(WorkerId q) const {
  auto it = std::lower_bound(peers_.begin(), peers_.end(), q);
  if (it == peers_.end() || *it != q) return peers_.size();
  return static_cast<std::size_t>(it - peers_.begin());
}

bool ClockTable::tracks(WorkerId q) const { return slot(q) < peers_.size(); }

std::uint64_t ClockTable::received(WorkerId q) const {
  const auto k = slot(q);
  return k < peers_.size() ? tau_[k] : 0;
}

void ClockTable::record_applied(WorkerId q, std::uint64_t upto_clock) {
  const auto k = slot(q);
  if (k == peers_.size()) throw std::out_of_range("record_applied: worker " + std::to_string(q) + " is not tracked");
  if (upto_clock < tau_[k]) {
    throw FifoViolation("clock from worker " + std::to_string(q) + " went backwards: " +
                        std::to_string(upto_clock) + " < " + std::to_string(tau_[k]));
  }
  tau_[k] = upto_clock;
}

void ClockTable::retire(WorkerId q) {
  const auto k = slot(q);
  if (k < peers_.size()) retired_[k] = true;
}

std::uint64_t ClockTable::max_gap() const {
  std::uint64_t gap = 0;
  for (std::size_t k = 0; k < peers_.size(); ++k) {
    if (retired_[k]) continue;
    if (own_ > tau_[k]) gap = std::max(gap, own_ - tau_[k]);
  }
  return gap;
}

bool may_proceed(const ClockTable& clocks, Staleness s) {
  if (s.is_infinite()) return true;
  return clocks.max_gap() <= s.value();
}

bool SharedClock::wait_ready(Staleness s) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return stopped_ || (own_applied_ == table_.own_clock() && may_proceed(table_, s)); });
  return !stopped_;
}

void SharedClock::record_commit() {
  std::lock_guard lock(mu_);
  table_.record_commit();
}

void SharedClock::record_own_applied(std::uint64_t clock) {
  {
    std::lock_guard lock(mu_);
    own_applied_ = std::max(own_applied_, clock);
  }
  cv_.notify_all();
}

void SharedClock::record_applied(WorkerId q, std::uint64_t clock) {
  {
    std::lock_guard lock(mu_);
    table_.record_applied(q, clock);
  }
  cv_.notify_all();
}

void SharedClock::retire(WorkerId q) {
  {
    std::lock_guard lock(mu_);
    table_.retire(q);
  }
  cv_.notify_all();
}

void SharedClock::stop() {
  {
    std::lock_guard lock(mu_);
    stopped_ = true;
  }
  cv_.notify_all();
}

ClockTable SharedClock::snapshot() const {
  std::lock_guard lock(mu_);
  return table_;
}

std::uint64_t SharedClock::own_applied() const {
  std::lock_guard lock(mu_);
  return own_applied_;
}

}  // namespace sfb
