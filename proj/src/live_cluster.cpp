#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "cluster_internal.hpp"
#include "sfb/error.hpp"

namespace sfb {

namespace {

struct Outgoing {
  Bytes bytes;
  std::uint64_t values = 0;
};

/// One worker with its three roles. Lock order: w_mu before q_mu.
struct LiveNode {
  LiveNode(WorkerOptions options, std::vector<Sample> shard, ParamMatrix initial)
      : core(std::move(options), std::move(shard), std::move(initial)) {}

  Worker core;
  std::unique_ptr<TcpMesh> mesh;
  std::vector<WorkerId> targets;
  std::size_t source_count = 0;

  std::shared_mutex w_mu;

  std::mutex q_mu;
  std::condition_variable cv_apply;
  std::condition_variable cv_compute;
  bool compute_done = false;
  bool applying = false;
  std::size_t closed_sources = 0;

  std::mutex out_mu;
  std::condition_variable cv_out;
  std::deque<Outgoing> out;
  bool out_closed = false;

  std::vector<ParamMatrix> trajectory;
  std::uint64_t max_gap = 0;
  std::atomic<std::uint64_t> dropped{0};
};

class LiveRun {
 public:
  LiveRun(const ExperimentConfig& cfg, std::span<const Sample> data) : cfg_(cfg), data_(data) {}

  RunReport run();

 private:
  void compute_loop(LiveNode& node);
  void apply_loop(LiveNode& node);
  void sender_loop(LiveNode& node);
  void on_frame(LiveNode& node, WorkerId from, Bytes payload);
  void on_close(LiveNode& node, WorkerId from, std::exception_ptr error);
  void fail(WorkerId where, std::exception_ptr error);
  void checkpoint(std::uint64_t iter);
  bool stopping() const { return aborted_.load() || target_hit_.load(); }

  const ExperimentConfig& cfg_;
  std::span<const Sample> data_;
  std::vector<std::unique_ptr<LiveNode>> nodes_;
  LiveNode* node0_ = nullptr;

  std::atomic<bool> aborted_{false};
  std::atomic<bool> target_hit_{false};
  std::mutex err_mu_;
  std::exception_ptr first_error_;

  std::mutex comm_mu_;
  CommCounters comm_;
  std::vector<ReportRow> rows_;
  detail::Clock::time_point start_;
};

void LiveRun::fail(WorkerId where, std::exception_ptr error) {
  {
    std::lock_guard lock(err_mu_);
    if (!first_error_) {
      first_error_ = error;
      try {
        std::rethrow_exception(error);
      } catch (const std::exception& e) {
        spdlog::error("worker {}: {}", where, e.what());
      } catch (...) {
        spdlog::error("worker {}: unknown failure", where);
      }
    }
  }
  aborted_.store(true);
  for (auto& n : nodes_) {
    {
      std::lock_guard lock(n->q_mu);
    }
    n->cv_apply.notify_all();
    n->cv_compute.notify_all();
    {
      std::lock_guard lock(n->out_mu);
      n->out_closed = true;
    }
    n->cv_out.notify_all();
    n->mesh->shutdown();
  }
}

void LiveRun::checkpoint(std::uint64_t iter) {
  ReportRow row;
  row.iter = iter;
  ParamMatrix ref;
  {
    std::shared_lock lock(node0_->w_mu);
    ref = node0_->core.primal();
  }
  row.objective = objective(cfg_.spec, ref, data_);
  for (auto& n : nodes_) {
    if (n.get() == node0_) continue;
    std::shared_lock lock(n->w_mu);
    row.max_disagreement = std::max(row.max_disagreement, frobenius_distance(ref, n->core.primal()));
  }
  {
    std::lock_guard lock(comm_mu_);
    row.comm_values = comm_.total.values;
    row.comm_bytes = comm_.total.bytes;
  }
  row.wall_ms = detail::elapsed_ms(start_);
  rows_.push_back(row);
  if (cfg_.objective_target && row.objective <= *cfg_.objective_target) {
    target_hit_.store(true);
    for (auto& n : nodes_) {
      {
        std::lock_guard lock(n->q_mu);
      }
      n->cv_compute.notify_all();
    }
  }
}

void LiveRun::compute_loop(LiveNode& node) {
  const auto id = node.core.id();
  try {
    for (std::uint64_t c = 0; c < cfg_.iters; ++c) {
      {
        std::unique_lock q(node.q_mu);
        bool stuck = false;
        node.cv_compute.wait(q, [&] {
          if (stopping() || node.core.ready(cfg_.staleness)) return true;
          stuck = node.closed_sources == node.source_count && !node.applying && !node.core.has_applicable();
          return stuck;
        });
        if (stopping()) break;
        if (stuck && !node.core.ready(cfg_.staleness)) {
          throw DeadlockError("worker " + std::to_string(id) + " blocked at iteration " + std::to_string(c) +
                              " after every source finished (lost messages?)");
        }
      }
      if (&node == node0_ && c % cfg_.obj_every == 0) {
        checkpoint(c);
        if (stopping()) break;
      }
      Outgoing item;
      {
        std::shared_lock w(node.w_mu);
        if (cfg_.record_trajectories) node.trajectory.push_back(node.core.primal());
        const auto batch = node.core.compute_batch();
        item.bytes = encode(to_message(batch, cfg_.spec.kind));
        item.values = batch_value_count(batch);
        std::lock_guard q(node.q_mu);
        node.max_gap = std::max(node.max_gap, node.core.clocks().max_gap());
        node.core.commit(batch);
      }
      node.cv_apply.notify_all();
      {
        std::lock_guard lock(node.out_mu);
        node.out.push_back(std::move(item));
      }
      node.cv_out.notify_one();
    }
  } catch (...) {
    fail(id, std::current_exception());
  }
  {
    std::lock_guard q(node.q_mu);
    node.compute_done = true;
  }
  node.cv_apply.notify_all();
  {
    std::lock_guard lock(node.out_mu);
    node.out_closed = true;
  }
  node.cv_out.notify_all();
}

void LiveRun::apply_loop(LiveNode& node) {
  try {
    for (;;) {
      std::vector<SFBatch> batches;
      {
        std::unique_lock q(node.q_mu);
        node.cv_apply.wait(q, [&] {
          return aborted_.load() || node.core.has_applicable() ||
                 (node.compute_done && node.closed_sources == node.source_count);
        });
        if (aborted_.load()) return;
        batches = node.core.take_applicable();
        if (batches.empty()) return;
        node.applying = true;
      }
      {
        std::unique_lock w(node.w_mu);
        node.core.apply_batches(batches);
        std::lock_guard q(node.q_mu);
        node.core.record_applied(batches);
        node.applying = false;
      }
      node.cv_compute.notify_all();
    }
  } catch (...) {
    fail(node.core.id(), std::current_exception());
  }
}

void LiveRun::sender_loop(LiveNode& node) {
  const auto id = node.core.id();
  try {
    node.mesh->connect(node.targets);
    for (;;) {
      Outgoing item;
      {
        std::unique_lock lock(node.out_mu);
        node.cv_out.wait(lock, [&] { return !node.out.empty() || node.out_closed; });
        if (node.out.empty() || aborted_.load()) break;
        item = std::move(node.out.front());
        node.out.pop_front();
      }
      for (auto t : node.targets) {
        node.mesh->send(t, item.bytes);
        std::lock_guard lock(comm_mu_);
        comm_.record(id, t, item.values, item.bytes.size());
      }
    }
    node.mesh->close_outgoing();
  } catch (...) {
    fail(id, std::current_exception());
  }
}

void LiveRun::on_frame(LiveNode& node, WorkerId from, Bytes payload) {
  const auto id = node.core.id();
  SFMessage m;
  try {
    m = decode(payload);
  } catch (const DecodeError& e) {
    spdlog::warn("worker {}: dropped message from {}: {}", id, from, e.what());
    ++node.dropped;
    return;
  }
  if (m.sender != from) {
    spdlog::warn("worker {}: dropped message claiming sender {} on stream from {}", id, m.sender, from);
    ++node.dropped;
    return;
  }
  try {
    std::lock_guard q(node.q_mu);
    node.core.enqueue(to_batch(std::move(m)));
  } catch (...) {
    fail(id, std::current_exception());
    return;
  }
  node.cv_apply.notify_all();
}

void LiveRun::on_close(LiveNode& node, WorkerId from, std::exception_ptr error) {
  if (error) {
    if (!aborted_.load()) fail(node.core.id(), error);
    return;
  }
  {
    std::lock_guard q(node.q_mu);
    ++node.closed_sources;
  }
  node.cv_apply.notify_all();
  node.cv_compute.notify_all();
  spdlog::debug("worker {}: stream from {} ended", node.core.id(), from);
}

RunReport LiveRun::run() {
  auto setup = detail::prepare(cfg_, data_);
  const std::size_t P = cfg_.workers;
  const auto peers = cfg_.peers.empty() ? loopback_peers(P) : cfg_.peers;

  std::vector<WorkerId> local;
  if (cfg_.local_worker) {
    local.push_back(*cfg_.local_worker);
  } else {
    for (std::size_t p = 0; p < P; ++p) local.push_back(static_cast<WorkerId>(p));
  }
  detail::BatchLogs logs(cfg_, local);
  for (auto p : local) {
    auto node = std::make_unique<LiveNode>(setup.options[p], std::move(setup.shards[p]), setup.initial);
    node->mesh = std::make_unique<TcpMesh>(p, peers, cfg_.tcp);
    node->targets = setup.topology.targets(p);
    node->source_count = setup.topology.sources(p).size();
    node->core.set_log_sink(logs.sink(p));
    if (p == 0) node0_ = node.get();
    nodes_.push_back(std::move(node));
  }

  start_ = detail::Clock::now();
  for (auto& n : nodes_) {
    auto* node = n.get();
    node->mesh->start_receiving(
        node->source_count, [this, node](WorkerId from, Bytes payload) { on_frame(*node, from, std::move(payload)); },
        [this, node](WorkerId from, std::exception_ptr e) { on_close(*node, from, e); });
  }
  std::vector<std::thread> threads;
  for (auto& n : nodes_) {
    auto* node = n.get();
    threads.emplace_back([this, node] { sender_loop(*node); });
    threads.emplace_back([this, node] { apply_loop(*node); });
    threads.emplace_back([this, node] { compute_loop(*node); });
  }
  for (auto& t : threads) t.join();
  for (auto& n : nodes_) n->mesh->wait_receivers();
  if (first_error_) std::rethrow_exception(first_error_);

  RunReport report;
  report.initial = setup.initial;
  report.reached_target = target_hit_.load();
  report.final_params.resize(P);
  if (cfg_.record_trajectories) report.trajectories.resize(P);
  for (auto& n : nodes_) {
    const auto p = n->core.id();
    report.final_params[p] = n->core.primal();
    if (cfg_.record_trajectories) {
      report.trajectories[p] = std::move(n->trajectory);
      report.trajectories[p].push_back(report.final_params[p]);
    }
    report.max_gate_gap = std::max(report.max_gate_gap, n->max_gap);
    report.dropped_messages += n->dropped.load();
  }
  if (node0_ != nullptr && !report.reached_target &&
      (rows_.empty() || rows_.back().iter < node0_->core.own_clock())) {
    checkpoint(node0_->core.own_clock());
  }
  report.rows = std::move(rows_);
  report.comm = std::move(comm_);
  report.batch_logs = logs.take();
  return report;
}

}  // namespace

RunReport run_live_cluster(const ExperimentConfig& cfg, std::span<const Sample> data) {
  LiveRun run(cfg, data);
  return run.run();
}

}  // namespace sfb
