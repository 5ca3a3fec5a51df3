#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sfb/cluster.hpp"
#include "sfb/error.hpp"
#include "sfb/harness.hpp"

using namespace sfb;

namespace {

ExperimentConfig mlr_config(std::size_t workers, std::size_t j = 3, std::size_t d = 4) {
  ExperimentConfig cfg;
  cfg.spec = synthetic_spec(ModelKind::kMlr, j, d);
  cfg.workers = workers;
  cfg.minibatch = 2;
  cfg.lr = LrSchedule::constant(0.1);
  cfg.iters = 50;
  cfg.obj_every = 10;
  cfg.seed = 3;
  return cfg;
}

WorkerOptions options_for(const ModelSpec& spec, WorkerId id, std::size_t workers, std::vector<WorkerId> sources,
                          std::size_t k, std::uint64_t n) {
  WorkerOptions o;
  o.id = id;
  o.workers = workers;
  o.spec = spec;
  o.lr = LrSchedule::constant(0.5);
  o.minibatch = k;
  o.seed = 77;
  o.n_total = n;
  o.sources = std::move(sources);
  return o;
}

double column_norm(const ParamMatrix& b, std::size_t c) {
  double sq = 0.0;
  for (std::size_t r = 0; r < b.rows(); ++r) sq += b(r, c) * b(r, c);
  return std::sqrt(sq);
}

SFBatch batch_from(WorkerId sender, std::uint64_t clock, double value) {
  SFBatch b;
  b.sender = sender;
  b.clock = clock;
  b.coeff = 1.0;
  b.pairs.push_back({Vec64::dense({value, 0.0}), Vec64::dense({1.0})});
  return b;
}

}  // namespace

TEST(LearningRate, Examples) {
  EXPECT_EQ(lr(LrSchedule::decaying(2, 0, 0), 0), 1.0);
  EXPECT_DOUBLE_EQ(lr(LrSchedule::decaying(2, 1, 2), 4), 1.0 / 7.0);
  EXPECT_EQ(lr(LrSchedule::constant(0.3), 1000), 0.3);
}

TEST(LearningRate, DecayingScheduleStrictlyDecreasing) {
  const auto s = LrSchedule::decaying(1.0, 0.5, 3);
  double prev = lr(s, 0);
  for (std::uint64_t c = 1; c <= 10000; ++c) {
    const double cur = lr(s, c);
    ASSERT_LT(cur, prev) << c;
    prev = cur;
  }
}

TEST(LearningRate, Validation) {
  EXPECT_THROW(LrSchedule::constant(0.0), ConfigError);
  EXPECT_THROW(LrSchedule::decaying(-1, 1, 1), ConfigError);
  EXPECT_THROW(LrSchedule::decaying(0, 1, 0), ConfigError);
  EXPECT_NO_THROW(LrSchedule::decaying(0, 1, 2));
}

TEST(Worker, SingleSampleBatchIsTheSampledFactor) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 12, 5);
  const auto spec = synthetic_spec(ModelKind::kMlr, 3, 4);
  Worker w(options_for(spec, 0, 1, {}, 1, data.size()), data, ParamMatrix(3, 4));
  MinibatchSampler twin(77, data.size());
  const auto pick = twin.draw(1)[0];
  const auto b = w.run_iteration();
  EXPECT_EQ(b.coeff, -0.5 * 12.0);
  EXPECT_EQ(b.clock, 1u);
  ASSERT_EQ(b.pairs.size(), 1u);
  EXPECT_EQ(b.pairs[0], mlr_sf(ParamMatrix(3, 4), data[pick]));
  EXPECT_EQ(w.own_clock(), 1u);
  EXPECT_FALSE(w.ready(Staleness(0)));
  EXPECT_EQ(w.apply_pending(), 1u);
  EXPECT_TRUE(w.ready(Staleness(0)));
}

TEST(Worker, InactiveHingeBatchStillCommits) {
  auto spec = synthetic_spec(ModelKind::kDml, 2, 2);
  std::vector<Sample> data{{Vec64::dense({5.0, 0.0}), Similarity::kDissimilar},
                           {Vec64::dense({0.0, 5.0}), Similarity::kDissimilar}};
  ParamMatrix eye(2, 2, {1, 0, 0, 1});
  Worker w(options_for(spec, 0, 1, {}, 4, 2), data, eye);
  const auto b = w.run_iteration();
  EXPECT_TRUE(b.pairs.empty());
  EXPECT_EQ(w.own_clock(), 1u);
  EXPECT_EQ(w.apply_pending(), 1u);
  EXPECT_EQ(w.replicated(), eye);
}

TEST(Worker, EmptyQueueIsANoOp) {
  auto spec = synthetic_spec(ModelKind::kSc, 1, 2);
  std::vector<Sample> data{{Vec64::dense({1.0, 0.0}), std::monostate{}}};
  // Column norm 5: a stray prox would rescale it.
  ParamMatrix b(2, 1, {3, 4});
  Worker w(options_for(spec, 0, 1, {}, 1, 1), data, b);
  EXPECT_EQ(w.apply_pending(), 0u);
  EXPECT_EQ(w.replicated(), b);
}

TEST(Worker, DrainOrderIsClockThenSender) {
  auto spec = synthetic_spec(ModelKind::kMlr, 2, 1);
  std::vector<Sample> data{{Vec64::dense({1.0}), ClassLabel{0}}};
  Worker w(options_for(spec, 0, 3, {1, 2}, 1, 3), data, ParamMatrix(2, 1));
  std::vector<std::pair<WorkerId, std::uint64_t>> order;
  w.set_log_sink([&](const SFBatch& b) { order.emplace_back(b.sender, b.clock); });
  w.enqueue(batch_from(2, 1, 1.0));
  w.enqueue(batch_from(1, 1, 2.0));
  w.enqueue(batch_from(1, 2, 3.0));
  // Own clock is 0: nothing yet applicable.
  EXPECT_FALSE(w.has_applicable());
  w.run_iteration();
  const auto taken = w.take_applicable();
  ASSERT_EQ(taken.size(), 3u);
  EXPECT_EQ(taken[0].sender, 0u);
  EXPECT_EQ(taken[1].sender, 1u);
  EXPECT_EQ(taken[2].sender, 2u);
  EXPECT_EQ(w.pending(), 1u);
  w.apply_batches(taken);
  w.record_applied(taken);
  EXPECT_EQ(w.clocks().received(1), 1u);
  EXPECT_EQ(w.clocks().received(2), 1u);
  EXPECT_EQ(order, (std::vector<std::pair<WorkerId, std::uint64_t>>{{0, 1}, {1, 1}, {2, 1}}));
}

TEST(Worker, RejectsForeignAndMisshapenBatches) {
  auto spec = synthetic_spec(ModelKind::kMlr, 2, 1);
  std::vector<Sample> data{{Vec64::dense({1.0}), ClassLabel{0}}};
  Worker w(options_for(spec, 0, 3, {1}, 1, 3), data, ParamMatrix(2, 1));
  EXPECT_THROW(w.enqueue(batch_from(2, 1, 1.0)), std::out_of_range);
  SFBatch bad;
  bad.sender = 1;
  bad.pairs.push_back({Vec64::dense({1.0, 2.0, 3.0}), Vec64::dense({1.0})});
  EXPECT_THROW(w.enqueue(bad), DimensionError);
  EXPECT_EQ(w.pending(), 0u);
  EXPECT_THROW(Worker(options_for(spec, 0, 1, {}, 1, 1), {}, ParamMatrix(2, 1)), ConfigError);
}

TEST(Worker, DivergenceGuard) {
  ParamMatrix w(1, 2, {1.0, 2e12});
  EXPECT_THROW(check_divergence(w, 0), DivergenceError);
  w(0, 1) = 1e11;
  EXPECT_NO_THROW(check_divergence(w, 0));
}

TEST(Cluster, SingleWorkerIsSequentialSgd) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 30, 8);
  auto cfg = mlr_config(1);
  cfg.iters = 100;
  cfg.record_trajectories = true;
  const auto report = run_cluster(cfg, data);
  const auto want =
      oracle::sgd_trajectory(3, 4, data, 0.1, cfg.minibatch, worker_seed(cfg.seed, 0), cfg.iters);
  ASSERT_EQ(report.trajectories[0].size(), want.size());
  for (std::size_t c = 0; c < want.size(); ++c) {
    EXPECT_LE(oracle::frobenius(oracle::to_dense(report.trajectories[0][c]), want[c]), 1e-12) << c;
  }
}

TEST(Cluster, BspCopiesIdenticalForEveryModel) {
  for (auto kind : {ModelKind::kMlr, ModelKind::kL2Mlr, ModelKind::kDml, ModelKind::kSc}) {
    const auto data = gen_synthetic(kind, 3, 5, 40, 2);
    auto cfg = mlr_config(4);
    cfg.spec = synthetic_spec(kind, 3, 5);
    cfg.lr = LrSchedule::constant(kind == ModelKind::kDml ? 0.002 : 0.02);
    cfg.iters = 30;
    cfg.record_trajectories = true;
    cfg.delays = DelaySchedule::random(4, 3);
    const auto report = run_cluster(cfg, data);
    for (std::size_t c = 0; c <= cfg.iters; ++c) {
      for (std::size_t p = 1; p < 4; ++p) {
        EXPECT_LE(frobenius_distance(report.trajectories[0][c], report.trajectories[p][c]), 1e-12)
            << to_string(kind) << " c=" << c << " p=" << p;
      }
    }
  }
}

TEST(Cluster, SspGateHoldsUnderDelays) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 64, 9);
  auto cfg = mlr_config(4);
  cfg.staleness = Staleness(2);
  cfg.iters = 1000;
  cfg.obj_every = 100;
  cfg.delays = DelaySchedule::random(11, 2);
  cfg.compute_probability = 0.6;
  cfg.keep_batch_logs = true;
  const auto report = run_cluster(cfg, data);
  EXPECT_LE(report.max_gate_gap, 2u);
  // Recount from the logs: at each own commit, how far behind every peer was.
  std::uint64_t worst = 0;
  for (std::size_t p = 0; p < 4; ++p) {
    std::vector<std::uint64_t> seen(4, 0);
    for (const auto& r : report.batch_logs[p]) {
      if (r.sender != p) {
        seen[r.sender] = std::max(seen[r.sender], r.clock);
        continue;
      }
      for (std::size_t q = 0; q < 4; ++q) {
        if (q != p && r.clock - 1 > seen[q]) worst = std::max(worst, r.clock - 1 - seen[q]);
      }
    }
  }
  EXPECT_LE(worst, 2u);
  EXPECT_GT(worst, 0u);
}

TEST(Cluster, AspDecayingScheduleDisagreementShrinks) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 64, 10);
  auto cfg = mlr_config(4);
  cfg.staleness = Staleness::infinite();
  cfg.lr = LrSchedule::decaying(1.0, 1.0, 4);
  cfg.iters = 2000;
  cfg.obj_every = 20;
  cfg.delays = DelaySchedule::random(12, 4);
  cfg.compute_probability = 0.7;
  const auto report = run_cluster(cfg, data);
  ASSERT_GE(report.rows.size(), 20u);
  double early = 0.0;
  for (std::size_t i = 0; i < 10; ++i) early = std::max(early, report.rows[i].max_disagreement);
  // The last row is taken after the drain; use the last in-run one.
  const double late = report.rows[report.rows.size() - 2].max_disagreement;
  EXPECT_GT(early, 0.0);
  EXPECT_LT(late, early);
  EXPECT_LT(report.rows.back().objective, report.rows.front().objective);
}

TEST(Cluster, ScColumnsStayInBallEveryIteration) {
  const auto data = gen_synthetic(ModelKind::kSc, 4, 6, 60, 13);
  ExperimentConfig cfg;
  cfg.spec = synthetic_spec(ModelKind::kSc, 4, 6);
  cfg.workers = 2;
  cfg.minibatch = 4;
  cfg.lr = LrSchedule::constant(0.05);
  cfg.iters = 500;
  cfg.obj_every = 100;
  cfg.record_trajectories = true;
  const auto report = run_cluster(cfg, data);
  for (const auto& traj : report.trajectories) {
    ASSERT_EQ(traj.size(), 501u);
    for (const auto& b : traj)
      for (std::size_t c = 0; c < b.cols(); ++c) ASSERT_LE(column_norm(b, c), 1.0 + 1e-12);
  }
}

TEST(Cluster, ReportRowsAndTarget) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 40, 14);
  auto cfg = mlr_config(2);
  cfg.iters = 95;
  const auto report = run_cluster(cfg, data);
  ASSERT_FALSE(report.rows.empty());
  EXPECT_EQ(report.rows.front().iter, 0u);
  EXPECT_DOUBLE_EQ(report.rows.front().objective, std::log(3.0));
  EXPECT_EQ(report.rows.back().iter, 95u);
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    EXPECT_GT(report.rows[i].iter, report.rows[i - 1].iter);
    EXPECT_GE(report.rows[i].comm_values, report.rows[i - 1].comm_values);
  }
  // Every checkpoint objective is the library objective of worker 0 at that point.
  cfg.objective_target = report.rows[3].objective + 1e-9;
  const auto stopped = run_cluster(cfg, data);
  EXPECT_TRUE(stopped.reached_target);
  EXPECT_LE(stopped.rows.back().objective, *cfg.objective_target);
  EXPECT_LT(stopped.rows.back().iter, 95u);
}

TEST(Cluster, HaltonRunCountsOnlyTargets) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 60, 15);
  auto cfg = mlr_config(6);
  cfg.topology = TopologyKind::kHalton;
  cfg.fanout = 2;
  cfg.staleness = Staleness(1);
  cfg.iters = 40;
  const auto report = run_cluster(cfg, data);
  for (const auto& [edge, counters] : report.comm.edges) {
    const auto t = Topology::halton(6, 2).targets(edge.first);
    EXPECT_NE(std::find(t.begin(), t.end(), edge.second), t.end());
    EXPECT_EQ(counters.messages, 40u);
  }
  EXPECT_EQ(report.comm.edges.size(), 12u);
}

TEST(Cluster, BatchLogsOnDiskMatchMemory) {
  const auto dir = std::filesystem::temp_directory_path() / "sfb_engine_logs";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 40, 16);
  auto cfg = mlr_config(3);
  cfg.staleness = Staleness(1);
  cfg.delays = DelaySchedule::random(3, 2);
  cfg.keep_batch_logs = true;
  cfg.log_dir = dir;
  const auto report = run_cluster(cfg, data);
  EXPECT_EQ(read_batch_logs(dir, 3), report.batch_logs);
  std::filesystem::remove_all(dir);
}

TEST(Cluster, SameSeedSameRun) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 40, 17);
  auto cfg = mlr_config(3);
  cfg.staleness = Staleness(2);
  cfg.delays = DelaySchedule::random(8, 3);
  cfg.compute_probability = 0.5;
  const auto a = run_cluster(cfg, data);
  const auto b = run_cluster(cfg, data);
  EXPECT_EQ(a.trace_hash, b.trace_hash);
  EXPECT_EQ(a.final_params, b.final_params);
}

TEST(Cluster, ConfigValidation) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 10, 1);
  auto cfg = mlr_config(4);
  cfg.sync = SyncMode::kFms;
  cfg.staleness = Staleness(1);
  EXPECT_THROW(run_cluster(cfg, data), ConfigError);
  cfg = mlr_config(20);
  EXPECT_THROW(run_cluster(cfg, data), ConfigError);
  cfg = mlr_config(1);
  cfg.topology = TopologyKind::kHalton;
  EXPECT_THROW(run_cluster(cfg, data), ConfigError);
  cfg = mlr_config(2);
  cfg.spec.cols = 5;
  EXPECT_THROW(run_cluster(cfg, data), std::exception);
  cfg = mlr_config(2);
  cfg.transport = TransportKind::kTcp;
  cfg.peers = loopback_peers(3);
  EXPECT_THROW(run_cluster(cfg, data), ConfigError);
}

TEST(LiveCluster, TcpBspMatchesSimulator) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 6, 48, 18);
  auto cfg = mlr_config(3, 3, 6);
  cfg.iters = 30;
  cfg.record_trajectories = true;
  const auto sim = run_cluster(cfg, data);
  cfg.transport = TransportKind::kTcp;
  const auto live = run_cluster(cfg, data);
  ASSERT_EQ(live.trajectories.size(), 3u);
  for (std::size_t p = 0; p < 3; ++p) {
    ASSERT_EQ(live.trajectories[p].size(), sim.trajectories[p].size());
    for (std::size_t c = 0; c < sim.trajectories[p].size(); ++c) {
      EXPECT_LE(frobenius_distance(live.trajectories[p][c], sim.trajectories[p][c]), 1e-12);
    }
  }
  EXPECT_EQ(live.comm.total, sim.comm.total);
}

TEST(LiveCluster, SspGateAndConvergence) {
  const auto data = gen_synthetic(ModelKind::kMlr, 3, 4, 64, 19);
  auto cfg = mlr_config(4);
  cfg.transport = TransportKind::kTcp;
  cfg.staleness = Staleness(2);
  cfg.iters = 200;
  cfg.obj_every = 50;
  const auto report = run_cluster(cfg, data);
  EXPECT_LE(report.max_gate_gap, 2u);
  EXPECT_LT(report.rows.back().objective, std::log(3.0));
  for (std::size_t p = 1; p < 4; ++p) EXPECT_LE(frobenius_distance(report.final_params[0], report.final_params[p]), 1e-9);
}
