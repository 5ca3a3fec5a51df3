#include <memory>

#include "cluster_internal.hpp"
#include "sfb/error.hpp"

namespace sfb {

namespace {

struct FmsClient {
  WorkerId id;
  std::vector<Sample> shard;
  std::unique_ptr<ModelPlugin> plugin;
  MinibatchSampler sampler;
  /// Last matrix received from the server.
  ParamMatrix w;
};

}  // namespace

RunReport run_fms(const ExperimentConfig& cfg, std::span<const Sample> data) {
  if (cfg.sync != SyncMode::kFms) {
    ExperimentConfig copy = cfg;
    copy.sync = SyncMode::kFms;
    return run_fms(copy, data);
  }
  auto setup = detail::prepare(cfg, data);
  const std::size_t P = cfg.workers;
  const auto server_id = static_cast<WorkerId>(P);
  const auto& spec = cfg.spec;

  std::vector<FmsClient> clients;
  clients.reserve(P);
  for (std::size_t p = 0; p < P; ++p) {
    auto& shard = setup.shards[p];
    auto plugin = make_plugin(spec, shard.size(), data.size());
    MinibatchSampler sampler(setup.options[p].seed, shard.size());
    clients.push_back({static_cast<WorkerId>(p), std::move(shard), std::move(plugin), std::move(sampler),
                       setup.initial});
  }
  // Server-side prox and primal map; identical for every client.
  const auto server_model = make_plugin(spec, 1, data.size());

  RunReport report;
  report.initial = setup.initial;
  if (cfg.record_trajectories) report.trajectories.resize(1);
  ParamMatrix server = setup.initial;
  const auto start = detail::Clock::now();

  auto checkpoint = [&](std::uint64_t iter) {
    ReportRow row;
    row.iter = iter;
    row.objective = objective(spec, server_model->primal(server), data);
    row.comm_values = report.comm.total.values;
    row.comm_bytes = report.comm.total.bytes;
    row.wall_ms = detail::elapsed_ms(start);
    report.rows.push_back(row);
    if (cfg.objective_target && row.objective <= *cfg.objective_target) report.reached_target = true;
  };

  std::uint64_t round = 0;
  for (; round < cfg.iters; ++round) {
    if (round % cfg.obj_every == 0) {
      checkpoint(round);
      if (report.reached_target) break;
    }
    if (cfg.record_trajectories) report.trajectories[0].push_back(server_model->primal(server));

    for (auto& client : clients) {
      SFBatch batch;
      batch.pairs = client.plugin->compute_pairs(client.w, client.shard, client.sampler.draw(cfg.minibatch));
      batch.coeff = client.plugin->batch_coeff(lr(cfg.lr, round), client.shard.size(), cfg.minibatch);
      batch.sender = client.id;
      batch.clock = round + 1;
      const auto up = encode(FullMatrixMessage{client.id, round, materialize_update(batch, spec.rows, spec.cols)});
      report.comm.record(client.id, server_id, spec.rows * spec.cols, up.size());

      auto msg = decode_full_matrix(up);
      if (msg.sender != client.id || msg.round != round) throw ConfigError("client message out of round");
      server += msg.matrix;
    }
    server_model->prox(server);
    check_divergence(server, server_id);

    const auto down = encode(FullMatrixMessage{server_id, round, server});
    for (auto& client : clients) {
      report.comm.record(server_id, client.id, spec.rows * spec.cols, down.size());
      client.w = decode_full_matrix(down).matrix;
    }
  }

  if (!report.reached_target && (report.rows.empty() || report.rows.back().iter < round)) checkpoint(round);
  report.final_params.push_back(server_model->primal(server));
  if (cfg.record_trajectories) report.trajectories[0].push_back(report.final_params[0]);
  return report;
}

}  // namespace sfb
