// sfb: run one factor-broadcast (or full-matrix baseline) experiment and
// write the checkpoint report as CSV.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sfb/cluster.hpp"
#include "sfb/dataset.hpp"
#include "sfb/error.hpp"
#include "sfb/harness.hpp"

namespace {

std::vector<double> split_numbers(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (ec != std::errc{} || end != piece.data() + piece.size() || piece.empty()) {
      throw sfb::ConfigError(std::string(flag) + ": cannot parse '" + piece + "'");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::size_t as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
    throw sfb::ConfigError(std::string(what) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-1 factor broadcast experiment runner"};
  app.get_formatter()->column_width(36);

  std::string model = "mlr";
  std::size_t workers = 1;
  std::string staleness = "0";
  std::string topology = "full";
  std::size_t q = 0;
  std::size_t minibatch = 1;
  std::optional<double> lr_const;
  std::string lr_theorem;
  double lambda = -1.0;
  double margin = 1.0;
  double theta = 0.5;
  std::uint64_t iters = 100;
  std::uint64_t obj_every = 10;
  std::string sync = "sfb";
  std::string transport = "sim";
  std::string peers_file;
  std::string data_file;
  std::string shape;
  std::string synthetic;
  double noise = 0.1;
  std::string out_file;
  std::uint64_t seed = 1;
  std::optional<std::uint32_t> worker_id;
  std::string log_dir;
  std::string write_data;
  std::uint64_t delay_max = 0;
  double compute_prob = 1.0;
  std::optional<double> target;
  bool verbose = false;

  app.add_option("--model", model, "mlr | l2mlr | dml | sc")->capture_default_str();
  app.add_option("--workers", workers, "worker count P")->capture_default_str();
  app.add_option("--staleness", staleness, "SSP bound s; 0 = BSP, inf = ASP")->capture_default_str();
  app.add_option("--topology", topology, "full | halton")->capture_default_str();
  app.add_option("--q", q, "Halton fan-out Q (default ceil(log2 P))");
  app.add_option("--minibatch", minibatch, "minibatch size K")->capture_default_str();
  auto* lr_opt = app.add_option("--lr", lr_const, "constant learning rate");
  app.add_option("--lr-theorem", lr_theorem, "LF,L[,S]: eta_c = 1/(LF/2 + 2 S L + sqrt(c)); S defaults to --staleness")
      ->excludes(lr_opt);
  app.add_option("--lambda", lambda, "L2 strength (l2mlr) or sparsity penalty (sc)");
  app.add_option("--margin", margin, "DML hinge margin")->capture_default_str();
  app.add_option("--theta", theta, "SDCA dual step damping in (0,1]")->capture_default_str();
  app.add_option("--iters", iters, "iterations per worker")->capture_default_str();
  app.add_option("--obj-every", obj_every, "objective checkpoint interval E")->capture_default_str();
  app.add_option("--sync", sync, "sfb | fms")->capture_default_str();
  app.add_option("--transport", transport, "sim | tcp")->capture_default_str();
  app.add_option("--peers", peers_file, "tcp peers file: one 'id host:port' per line");
  app.add_option("--worker-id", worker_id, "tcp: run only this worker (needs --peers)");
  auto* data_opt = app.add_option("--data", data_file, "LIBSVM-style data file (0-based indices)");
  app.add_option("--shape", shape, "R,C model matrix shape for --data")->needs(data_opt);
  app.add_option("--synthetic", synthetic, "J,D,N,seed synthetic problem")->excludes(data_opt);
  app.add_option("--noise", noise, "synthetic noise level")->capture_default_str();
  app.add_option("--write-data", write_data, "also write the dataset in use to this file");
  app.add_option("--out", out_file, "report CSV (default stdout)");
  app.add_option("--seed", seed, "run seed")->capture_default_str();
  app.add_option("--log-dir", log_dir, "write per-worker batch logs here");
  app.add_option("--delay-max", delay_max, "sim: random per-message delay in [0, max] steps")
      ->capture_default_str();
  app.add_option("--compute-prob", compute_prob, "sim: chance a ready worker computes per step")
      ->capture_default_str();
  app.add_option("--objective-target", target, "stop once worker 0's objective reaches this");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("sfb"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    sfb::ExperimentConfig cfg;
    const auto kind = sfb::parse_model_kind(model);
    std::vector<sfb::Sample> data;
    if (!synthetic.empty()) {
      const auto v = split_numbers(synthetic, "--synthetic");
      if (v.size() != 4) throw sfb::ConfigError("--synthetic expects J,D,N,seed");
      const auto j = as_count(v[0], "J");
      const auto d = as_count(v[1], "D");
      cfg.spec = sfb::synthetic_spec(kind, j, d);
      data = sfb::gen_synthetic(kind, j, d, as_count(v[2], "N"), as_count(v[3], "seed"), noise);
    } else if (!data_file.empty()) {
      if (shape.empty()) throw sfb::ConfigError("--data needs --shape R,C");
      const auto v = split_numbers(shape, "--shape");
      if (v.size() != 2) throw sfb::ConfigError("--shape expects R,C");
      cfg.spec = sfb::synthetic_spec(kind, 1, 1);
      cfg.spec.rows = as_count(v[0], "R");
      cfg.spec.cols = as_count(v[1], "C");
      data = sfb::load_dataset(data_file, kind, cfg.spec.feature_dim());
    } else {
      throw sfb::ConfigError("need --data FILE or --synthetic J,D,N,seed");
    }
    if (lambda >= 0.0) cfg.spec.lambda = lambda;
    cfg.spec.margin = margin;
    cfg.spec.sdca_theta = theta;
    if (!write_data.empty()) sfb::save_dataset(write_data, data);

    cfg.workers = workers;
    cfg.staleness = sfb::Staleness::parse(staleness);
    cfg.topology = sfb::parse_topology_kind(topology);
    cfg.fanout = q;
    cfg.minibatch = minibatch;
    if (!lr_theorem.empty()) {
      const auto v = split_numbers(lr_theorem, "--lr-theorem");
      if (v.size() != 2 && v.size() != 3) throw sfb::ConfigError("--lr-theorem expects LF,L[,S]");
      std::uint64_t s = 0;
      if (v.size() == 3) {
        s = as_count(v[2], "S");
      } else if (cfg.staleness.is_infinite()) {
        throw sfb::ConfigError("--lr-theorem under infinite staleness needs an explicit S (LF,L,S)");
      } else {
        s = cfg.staleness.value();
      }
      cfg.lr = sfb::LrSchedule::decaying(v[0], v[1], s);
    } else {
      cfg.lr = sfb::LrSchedule::constant(lr_const.value_or(0.1));
    }
    cfg.iters = iters;
    cfg.obj_every = obj_every;
    cfg.sync = sfb::parse_sync_mode(sync);
    cfg.transport = sfb::parse_transport_kind(transport);
    if (!peers_file.empty()) cfg.peers = sfb::load_peers(peers_file);
    cfg.local_worker = worker_id;
    cfg.seed = seed;
    cfg.objective_target = target;
    if (delay_max > 0) cfg.delays = sfb::DelaySchedule::random(sfb::mix_seed(seed ^ 0xde1a7ULL), delay_max);
    cfg.compute_probability = compute_prob;
    if (!log_dir.empty()) cfg.log_dir = log_dir;

    spdlog::info("{} {} x {} on {} samples: P={} s={} topology={} K={} lr={} sync={} transport={}",
                 sfb::to_string(kind), cfg.spec.rows, cfg.spec.cols, data.size(), cfg.workers,
                 cfg.staleness.to_string(), sfb::to_string(cfg.topology), cfg.minibatch, cfg.lr.describe(),
                 sfb::to_string(cfg.sync), sfb::to_string(cfg.transport));

    const auto report = sfb::run_cluster(cfg, data);
    if (out_file.empty()) {
      sfb::write_report_csv(std::cout, report.rows);
    } else {
      sfb::save_report_csv(out_file, report.rows);
    }
    if (!report.rows.empty()) {
      const auto& last = report.rows.back();
      spdlog::info("iter {} objective {:.6g} comm_values {} comm_bytes {} disagreement {:.3g}", last.iter,
                   last.objective, last.comm_values, last.comm_bytes, last.max_disagreement);
    }
    if (report.dropped_messages > 0) spdlog::warn("{} corrupt messages dropped", report.dropped_messages);
    return 0;
  } catch (const sfb::ConfigError& e) {
    spdlog::error("configuration: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
