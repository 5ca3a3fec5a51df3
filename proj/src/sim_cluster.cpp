#include <spdlog/spdlog.h>

#include <algorithm>
#include <sstream>

#include "cluster_internal.hpp"
#include "sfb/error.hpp"

namespace sfb {

namespace {

double max_disagreement(const std::vector<Worker>& workers) {
  const auto ref = workers.front().primal();
  double worst = 0.0;
  for (std::size_t p = 1; p < workers.size(); ++p) {
    worst = std::max(worst, frobenius_distance(ref, workers[p].primal()));
  }
  return worst;
}

std::string clock_summary(const std::vector<Worker>& workers) {
  std::ostringstream os;
  for (const auto& w : workers) {
    os << " [worker " << w.id() << ": t=" << w.own_clock() << " tau=";
    for (auto q : w.clocks().tracked_peers()) os << q << ':' << w.clocks().received(q) << ' ';
    os << "queued=" << w.pending() << ']';
  }
  return os.str();
}

}  // namespace

RunReport run_sim_cluster(const ExperimentConfig& cfg, std::span<const Sample> data) {
  auto setup = detail::prepare(cfg, data);
  const std::size_t P = cfg.workers;

  std::vector<Worker> workers;
  workers.reserve(P);
  for (std::size_t p = 0; p < P; ++p) {
    workers.emplace_back(setup.options[p], std::move(setup.shards[p]), setup.initial);
  }
  std::vector<WorkerId> ids(P);
  for (std::size_t p = 0; p < P; ++p) ids[p] = static_cast<WorkerId>(p);
  detail::BatchLogs logs(cfg, ids);
  for (auto& w : workers) w.set_log_sink(logs.sink(w.id()));

  std::vector<std::vector<WorkerId>> targets(P);
  for (std::size_t p = 0; p < P; ++p) targets[p] = setup.topology.targets(static_cast<WorkerId>(p));

  SimNetwork net(P, cfg.delays);
  Rng straggle(mix_seed(cfg.seed ^ 0x5354524147474c45ULL));

  RunReport report;
  report.initial = setup.initial;
  if (cfg.record_trajectories) report.trajectories.resize(P);

  const auto start = detail::Clock::now();
  auto checkpoint = [&](std::uint64_t iter) {
    ReportRow row;
    row.iter = iter;
    row.objective = objective(cfg.spec, workers[0].primal(), data);
    row.comm_values = report.comm.total.values;
    row.comm_bytes = report.comm.total.bytes;
    row.max_disagreement = max_disagreement(workers);
    row.wall_ms = detail::elapsed_ms(start);
    report.rows.push_back(row);
    if (cfg.objective_target && row.objective <= *cfg.objective_target) report.reached_target = true;
  };

  for (;;) {
    for (auto& d : net.step()) {
      SFMessage m;
      try {
        m = decode(d.payload);
      } catch (const DecodeError& e) {
        spdlog::warn("worker {}: dropped message from {}: {}", d.to, d.from, e.what());
        ++report.dropped_messages;
        continue;
      }
      if (m.sender != d.from) {
        spdlog::warn("worker {}: dropped message claiming sender {} on edge from {}", d.to, m.sender, d.from);
        ++report.dropped_messages;
        continue;
      }
      workers[d.to].enqueue(to_batch(std::move(m)));
    }
    for (auto& w : workers) w.apply_pending();

    bool all_done = true;
    bool any_ready = false;
    for (auto& w : workers) {
      if (w.own_clock() >= cfg.iters) continue;
      all_done = false;
      if (!w.ready(cfg.staleness)) continue;
      any_ready = true;
      if (cfg.compute_probability < 1.0 && straggle.uniform() >= cfg.compute_probability) continue;

      const auto p = w.id();
      const auto c = w.own_clock();
      if (p == 0 && c % cfg.obj_every == 0) {
        checkpoint(c);
        if (report.reached_target) break;
      }
      report.max_gate_gap = std::max(report.max_gate_gap, w.clocks().max_gap());
      if (cfg.record_trajectories) report.trajectories[p].push_back(w.primal());

      const auto batch = w.run_iteration();
      const auto bytes = encode(to_message(batch, cfg.spec.kind));
      const auto values = batch_value_count(batch);
      for (auto t : targets[p]) {
        report.comm.record(p, t, values, bytes.size());
        net.send(p, t, bytes);
      }
    }
    if (report.reached_target) break;

    const bool drained = std::all_of(workers.begin(), workers.end(), [](const Worker& w) { return w.pending() == 0; });
    if (all_done && net.idle() && drained) break;
    if (!all_done && !any_ready && net.idle()) {
      throw DeadlockError("simulated cluster deadlocked at step " + std::to_string(net.now()) + ":" +
                          clock_summary(workers));
    }
  }

  for (auto& w : workers) w.apply_pending();
  if (!report.reached_target && (report.rows.empty() || report.rows.back().iter < workers[0].own_clock())) {
    checkpoint(workers[0].own_clock());
  }
  for (auto& w : workers) {
    report.final_params.push_back(w.primal());
    if (cfg.record_trajectories) report.trajectories[w.id()].push_back(w.primal());
  }
  report.batch_logs = logs.take();
  report.sim_steps = net.now();
  report.trace_hash = net.trace_hash();
  return report;
}

}  // namespace sfb
