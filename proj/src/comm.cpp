#include "sfb/comm.hpp"

namespace sfb {

void CommCounters::record(WorkerId from, WorkerId to, std::uint64_t values, std::uint64_t bytes) {
  for (auto* c : {&total, &edges[{from, to}]}) {
    c->values += values;
    c->bytes += bytes;
    c->messages += 1;
  }
}

void CommCounters::merge(const CommCounters& other) {
  total.values += other.total.values;
  total.bytes += other.total.bytes;
  total.messages += other.total.messages;
  for (const auto& [edge, c] : other.edges) {
    auto& mine = edges[edge];
    mine.values += c.values;
    mine.bytes += c.bytes;
    mine.messages += c.messages;
  }
}

std::uint64_t expected_comm_values(CommMode mode, std::uint64_t workers, std::uint64_t minibatch,
                                   std::uint64_t rows, std::uint64_t cols, std::uint64_t fanout) {
  switch (mode) {
    case CommMode::kSfbFull: return workers * (workers - 1) * minibatch * (rows + cols);
    case CommMode::kSfbHalton: return workers * fanout * minibatch * (rows + cols);
    case CommMode::kFms: return 2 * workers * rows * cols;
  }
  return 0;
}

}  // namespace sfb
