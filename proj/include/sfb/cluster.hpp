#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sfb/codec.hpp"
#include "sfb/comm.hpp"
#include "sfb/consistency.hpp"
#include "sfb/engine.hpp"
#include "sfb/models.hpp"
#include "sfb/sim_network.hpp"
#include "sfb/tcp_mesh.hpp"
#include "sfb/topology.hpp"

namespace sfb {

enum class SyncMode { kSfb, kFms };
enum class TransportKind { kSim, kTcp };

std::string_view to_string(SyncMode mode);
SyncMode parse_sync_mode(std::string_view name);
std::string_view to_string(TransportKind kind);
TransportKind parse_transport_kind(std::string_view name);

struct ExperimentConfig {
  ModelSpec spec;
  std::size_t workers = 1;
  Staleness staleness;
  TopologyKind topology = TopologyKind::kFull;
  /// Halton fan-out Q; 0 picks ceil(log2 P).
  std::size_t fanout = 0;
  std::size_t minibatch = 1;
  LrSchedule lr;
  std::uint64_t iters = 100;
  /// Worker 0 evaluates the objective every obj_every iterations.
  std::uint64_t obj_every = 10;
  SyncMode sync = SyncMode::kSfb;
  TransportKind transport = TransportKind::kSim;
  /// Seeds W^0, the samplers and the simulator's random choices.
  std::uint64_t seed = 1;
  /// Stop once worker 0's objective reaches this value.
  std::optional<double> objective_target;

  // simulator
  DelaySchedule delays;
  /// Chance that a ready worker computes in a given step; below 1 it models
  /// stragglers.
  double compute_probability = 1.0;

  // tcp
  /// Empty: loopback addresses on free ports.
  std::vector<PeerAddress> peers;
  /// Run only this worker in this process (multi-process deployment).
  std::optional<WorkerId> local_worker;
  TcpOptions tcp;

  // instrumentation
  /// Keep every worker's W_p^c at each compute step.
  bool record_trajectories = false;
  /// Keep each worker's batch log in memory.
  bool keep_batch_logs = false;
  /// Write each worker's batch log to <dir>/worker_<p>.sflog.
  std::optional<std::filesystem::path> log_dir;

  void validate() const;
  Topology make_topology() const;
};

struct ReportRow {
  std::uint64_t iter = 0;
  double wall_ms = 0.0;
  double objective = 0.0;
  std::uint64_t comm_values = 0;
  std::uint64_t comm_bytes = 0;
  double max_disagreement = 0.0;
};

struct RunReport {
  std::vector<ReportRow> rows;
  CommCounters comm;
  /// W^0 as replicated (Z for SDCA).
  ParamMatrix initial;
  /// Final primal matrix per worker run in this process (indexed by id;
  /// empty for remote workers). FMS: the server's matrix at index 0.
  std::vector<ParamMatrix> final_params;
  /// [worker][c] = W_p^c, the primal matrix worker p computed iteration c
  /// against, followed by the final matrix. FMS: server W after each round.
  std::vector<std::vector<ParamMatrix>> trajectories;
  /// [worker] = batch records in the order they entered that worker's state.
  std::vector<std::vector<SFMessage>> batch_logs;
  /// Largest max_q (t_p - tau[q]) seen when a worker began an iteration.
  std::uint64_t max_gate_gap = 0;
  /// Simulator only.
  std::uint64_t sim_steps = 0;
  std::uint64_t trace_hash = 0;
  std::uint64_t dropped_messages = 0;
  bool reached_target = false;
};

RunReport run_cluster(const ExperimentConfig& cfg, std::span<const Sample> data);
RunReport run_sim_cluster(const ExperimentConfig& cfg, std::span<const Sample> data);
RunReport run_live_cluster(const ExperimentConfig& cfg, std::span<const Sample> data);
/// Client-server full-matrix baseline, BSP only.
RunReport run_fms(const ExperimentConfig& cfg, std::span<const Sample> data);

}  // namespace sfb
