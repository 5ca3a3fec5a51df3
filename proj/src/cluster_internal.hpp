#pragma once

#include <chrono>
#include <fstream>
#include <memory>
#include <vector>

#include "sfb/cluster.hpp"

namespace sfb::detail {

struct ClusterSetup {
  Topology topology;
  std::vector<std::vector<Sample>> shards;
  ParamMatrix initial;
  std::vector<WorkerOptions> options;
};

/// Validates cfg against the data and derives shards, W^0 and per-worker
/// options.
ClusterSetup prepare(const ExperimentConfig& cfg, std::span<const Sample> data);

/// Per-worker batch history, in memory and/or on disk. sink(p) must only be
/// driven by one thread at a time.
class BatchLogs {
 public:
  BatchLogs(const ExperimentConfig& cfg, std::span<const WorkerId> local);
  Worker::LogSink sink(WorkerId p);
  std::vector<std::vector<SFMessage>> take();

 private:
  ModelKind kind_;
  bool keep_;
  std::vector<std::vector<SFMessage>> memory_;
  std::vector<std::unique_ptr<std::ofstream>> files_;
};

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace sfb::detail
