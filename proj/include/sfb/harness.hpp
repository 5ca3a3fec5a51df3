#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sfb/cluster.hpp"
#include "sfb/codec.hpp"
#include "sfb/models.hpp"

namespace sfb {

// ---- synthetic data ------------------------------------------------------------

/// Matrix shape for a synthetic problem: J x D for MLR / L2-MLR, J latent
/// dims x D for DML, D x J dictionary for SC.
ModelSpec synthetic_spec(ModelKind kind, std::size_t j, std::size_t d);

/// Seeded synthetic data.
///   MLR / L2-MLR: J unit-sphere centers in R^D; each point is a random
///     center plus N(0, noise^2) per coordinate, labelled by its center.
///   DML: points drawn as above; each sample is the difference of two points,
///     similar iff they share a center; each sample is similar with
///     probability 1/2.
///   SC: D x J dictionary with unit columns; each signal combines up to three
///     atoms with N(0,1) weights, plus noise.
std::vector<Sample> gen_synthetic(ModelKind kind, std::size_t j, std::size_t d, std::size_t n,
                                  std::uint64_t seed, double noise = 0.1);

// ---- gradient check ------------------------------------------------------------

/// max_ij |(f(W + eps E_ij) - f(W - eps E_ij)) / 2 eps - (u v^T)_ij| for the
/// sample's factor pair. SC freezes the code (computed at W unless given).
/// L2-MLR is checked on its data term.
double finite_diff_check(const ModelSpec& spec, const ParamMatrix& w, const Sample& s, double eps,
                         const Vec64* frozen_code = nullptr);

// ---- batch logs ----------------------------------------------------------------

std::filesystem::path batch_log_path(const std::filesystem::path& dir, WorkerId p);
void append_batch_record(std::ostream& out, const SFMessage& record);
void write_batch_log(const std::filesystem::path& path, std::span<const SFMessage> records);
std::vector<SFMessage> read_batch_log(const std::filesystem::path& path);
/// Reads worker_0 .. worker_{P-1} from dir.
std::vector<std::vector<SFMessage>> read_batch_logs(const std::filesystem::path& dir, std::size_t workers);

// ---- auxiliary sequence -------------------------------------------------------

struct AuxiliaryPoint {
  WorkerId worker = 0;
  /// Iteration c: the worker's state before computing iteration c.
  std::uint64_t iter = 0;
  /// |W^c - W_p^c|_F
  double disagreement = 0.0;
  /// Batches in W^c missing from W_p^c, and the sum of their update norms.
  std::size_t pending = 0;
  double pending_norm_sum = 0.0;
};

struct AuxiliaryReport {
  /// W^c = W^0 + every batch with clock <= c, for c = 0..C.
  std::vector<ParamMatrix> sequence;
  std::vector<AuxiliaryPoint> points;
  /// max over workers of the disagreement at iteration c; NaN where no
  /// worker logged iteration c.
  std::vector<double> max_by_iter;
};

/// Replays per-worker batch logs. Worker p's state before iteration c is W^0
/// plus every record in its log preceding its own record with clock c + 1;
/// W^c sums all workers' batches with clock <= c in (clock, sender) order.
/// Throws std::invalid_argument on an incomplete log (own clocks not
/// 1, 2, ... in order, or a peer's records cut short).
AuxiliaryReport reconstruct_auxiliary(std::span<const std::vector<SFMessage>> logs,
                                      const ParamMatrix& initial, bool keep_sequence = true);

// ---- report ------------------------------------------------------------------

/// Header: iter,wall_ms,objective,comm_values,comm_bytes,max_disagreement
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);
void save_report_csv(const std::filesystem::path& path, std::span<const ReportRow> rows);

}  // namespace sfb
