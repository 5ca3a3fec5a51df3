#include <cmath>
#include <string>

#include "cluster_internal.hpp"
#include "sfb/dataset.hpp"
#include "sfb/error.hpp"
#include "sfb/harness.hpp"

namespace sfb {

std::string_view to_string(SyncMode mode) { return mode == SyncMode::kSfb ? "sfb" : "fms"; }

SyncMode parse_sync_mode(std::string_view name) {
  if (name == "sfb") return SyncMode::kSfb;
  if (name == "fms") return SyncMode::kFms;
  throw ConfigError("unknown sync mode '" + std::string(name) + "' (sfb|fms)");
}

std::string_view to_string(TransportKind kind) { return kind == TransportKind::kSim ? "sim" : "tcp"; }

TransportKind parse_transport_kind(std::string_view name) {
  if (name == "sim") return TransportKind::kSim;
  if (name == "tcp") return TransportKind::kTcp;
  throw ConfigError("unknown transport '" + std::string(name) + "' (sim|tcp)");
}

void ExperimentConfig::validate() const {
  spec.validate();
  lr.validate();
  if (workers == 0) throw ConfigError("need at least one worker");
  if (minibatch == 0) throw ConfigError("minibatch size must be positive");
  if (iters == 0) throw ConfigError("iteration budget must be positive");
  if (obj_every == 0) throw ConfigError("objective interval must be positive");
  if (!(compute_probability > 0.0 && compute_probability <= 1.0)) {
    throw ConfigError("compute probability must lie in (0, 1]");
  }
  if (topology == TopologyKind::kHalton) make_topology();
  if (sync == SyncMode::kFms) {
    if (staleness.value() != 0) throw ConfigError("the full-matrix baseline runs under BSP only (staleness 0)");
    if (transport != TransportKind::kSim) throw ConfigError("the full-matrix baseline runs in-process only");
  }
  if (local_worker) {
    if (transport != TransportKind::kTcp) throw ConfigError("a single local worker needs the tcp transport");
    if (peers.empty()) throw ConfigError("a single local worker needs a peers file");
    if (*local_worker >= workers) throw ConfigError("local worker id out of range");
    if (objective_target) throw ConfigError("an objective target needs all workers in one process");
  }
  if (!peers.empty() && peers.size() != workers) {
    throw ConfigError("peers file lists " + std::to_string(peers.size()) + " workers, expected " +
                      std::to_string(workers));
  }
}

Topology ExperimentConfig::make_topology() const {
  if (topology == TopologyKind::kFull) return Topology::full(workers);
  if (workers < 2) throw ConfigError("Halton broadcast needs at least two workers");
  return Topology::halton(workers, fanout == 0 ? default_halton_fanout(workers) : fanout);
}

RunReport run_cluster(const ExperimentConfig& cfg, std::span<const Sample> data) {
  if (cfg.sync == SyncMode::kFms) return run_fms(cfg, data);
  if (cfg.transport == TransportKind::kTcp) return run_live_cluster(cfg, data);
  return run_sim_cluster(cfg, data);
}

namespace detail {

namespace {

void check_data(const ModelSpec& spec, std::span<const Sample> data) {
  const auto dim = spec.feature_dim();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    if (s.features.dim() != dim) {
      throw DimensionError("sample " + std::to_string(i) + " has " + std::to_string(s.features.dim()) +
                           " features, model expects " + std::to_string(dim));
    }
    switch (spec.kind) {
      case ModelKind::kMlr:
      case ModelKind::kL2Mlr: {
        const auto* y = std::get_if<ClassLabel>(&s.label);
        if (y == nullptr || y->id >= spec.rows) {
          throw ConfigError("sample " + std::to_string(i) + " needs a class label below " +
                            std::to_string(spec.rows));
        }
        break;
      }
      case ModelKind::kDml:
        if (!std::holds_alternative<Similarity>(s.label)) {
          throw ConfigError("sample " + std::to_string(i) + " needs a similarity flag");
        }
        break;
      case ModelKind::kSc: break;
    }
  }
}

}  // namespace

ClusterSetup prepare(const ExperimentConfig& cfg, std::span<const Sample> data) {
  cfg.validate();
  if (data.size() < cfg.workers) {
    throw ConfigError("need at least one sample per worker (" + std::to_string(data.size()) + " samples, " +
                      std::to_string(cfg.workers) + " workers)");
  }
  check_data(cfg.spec, data);
  ClusterSetup setup{cfg.make_topology(), shard_round_robin(data, cfg.workers),
                     initial_params(cfg.spec, cfg.seed), {}};
  for (std::size_t p = 0; p < cfg.workers; ++p) {
    const auto id = static_cast<WorkerId>(p);
    WorkerOptions o;
    o.id = id;
    o.workers = cfg.workers;
    o.spec = cfg.spec;
    o.lr = cfg.lr;
    o.minibatch = cfg.minibatch;
    o.seed = worker_seed(cfg.seed, id);
    o.n_total = data.size();
    o.sources = setup.topology.sources(id);
    o.whole_rounds = cfg.staleness.value() == 0;
    setup.options.push_back(std::move(o));
  }
  return setup;
}

BatchLogs::BatchLogs(const ExperimentConfig& cfg, std::span<const WorkerId> local)
    : kind_(cfg.spec.kind), keep_(cfg.keep_batch_logs), memory_(cfg.workers), files_(cfg.workers) {
  if (!cfg.log_dir) return;
  std::filesystem::create_directories(*cfg.log_dir);
  for (auto p : local) {
    const auto path = batch_log_path(*cfg.log_dir, p);
    files_[p] = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*files_[p]) throw ConfigError("cannot write batch log " + path.string());
  }
}

Worker::LogSink BatchLogs::sink(WorkerId p) {
  if (!keep_ && !files_[p]) return {};
  return [this, p](const SFBatch& b) {
    auto record = to_message(b, kind_);
    if (files_[p]) append_batch_record(*files_[p], record);
    if (keep_) memory_[p].push_back(std::move(record));
  };
}

std::vector<std::vector<SFMessage>> BatchLogs::take() {
  for (auto& f : files_) {
    if (f) f->flush();
  }
  if (!keep_) return {};
  return std::move(memory_);
}

}  // namespace detail

}  // namespace sfb
