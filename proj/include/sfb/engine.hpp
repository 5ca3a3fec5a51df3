#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sfb/consistency.hpp"
#include "sfb/models.hpp"
#include "sfb/rng.hpp"
#include "sfb/tensor.hpp"

namespace sfb {

/// Constant(eta) or the decaying schedule 1 / (L_F/2 + 2 s L + sqrt(c)).
struct LrSchedule {
  enum class Kind { kConstant, kDecaying };
  Kind kind = Kind::kConstant;
  double eta = 0.1;
  double lf = 0.0;
  double l = 0.0;
  std::uint64_t s = 0;

  static LrSchedule constant(double eta);
  static LrSchedule decaying(double lf, double l, std::uint64_t s);
  void validate() const;
  std::string describe() const;
};

/// Step size for iteration c (0-based, the worker's own counter).
double lr(const LrSchedule& sched, std::uint64_t c);

/// Seed of worker p's sampler, shared by the SFB and FMS runtimes.
std::uint64_t worker_seed(std::uint64_t run_seed, WorkerId p);

/// K shard indices drawn uniformly with replacement.
class MinibatchSampler {
 public:
  MinibatchSampler(std::uint64_t seed, std::size_t shard_size);
  std::vector<std::size_t> draw(std::size_t k);

 private:
  Rng rng_;
  std::size_t shard_size_;
};

struct WorkerOptions {
  WorkerId id = 0;
  std::size_t workers = 1;
  ModelSpec spec;
  LrSchedule lr;
  std::size_t minibatch = 1;
  /// Sampler seed; see worker_seed.
  std::uint64_t seed = 0;
  /// Global sample count N.
  std::uint64_t n_total = 0;
  /// Peers that broadcast to this worker.
  std::vector<WorkerId> sources;
  /// Release batches one complete clock round at a time (own batch plus one
  /// from every source), so every copy runs the prox on the same sums. Set
  /// for BSP.
  bool whole_rounds = false;
};

/// Protocol state of one SFB worker, without threads or transport.
///
/// A committed batch carries clock = the sender's commit count (iteration c
/// commits clock c + 1), so applying it sets tau[sender] = clock. The
/// worker's own batch goes through the same queue as received ones. Batches
/// are applied only once their clock is at most the worker's own commit
/// count; faster peers' batches wait in the queue until it catches up.
///
/// Not thread-safe. The live runtime serializes the queue and clock methods
/// and gives apply_batches exclusive access to the matrix.
class Worker {
 public:
  /// Called with each batch as it enters the worker's history: own batches at
  /// commit, received batches when applied.
  using LogSink = std::function<void(const SFBatch&)>;

  Worker(WorkerOptions options, std::vector<Sample> shard, ParamMatrix initial);

  WorkerId id() const { return options_.id; }
  const WorkerOptions& options() const { return options_; }
  const ClockTable& clocks() const { return clocks_; }
  std::uint64_t own_clock() const { return clocks_.own_clock(); }
  std::uint64_t own_applied() const { return own_applied_; }
  std::size_t shard_size() const { return shard_.size(); }
  std::span<const Sample> shard() const { return shard_; }
  const ModelPlugin& plugin() const { return *plugin_; }

  /// W for SGD models, Z for SDCA.
  const ParamMatrix& replicated() const { return w_; }
  ParamMatrix primal() const { return plugin_->primal(w_); }

  void set_log_sink(LogSink sink) { log_ = std::move(sink); }

  /// Own batches all applied and the staleness gate open.
  bool ready(Staleness s) const;

  /// Samples, computes and scales the next batch against the current matrix.
  SFBatch compute_batch();
  /// Records the commit and queues the batch for self-application.
  void commit(const SFBatch& batch);
  /// compute_batch + commit.
  SFBatch run_iteration();

  /// Queues a received batch. Throws out_of_range for senders outside the
  /// receive set and DimensionError for mis-shaped pairs.
  void enqueue(SFBatch batch);
  std::size_t pending() const { return queue_.size(); }
  bool has_applicable() const;
  /// Removes applicable batches from the queue, sorted by (clock, sender).
  /// With whole_rounds, only complete rounds are applicable.
  std::vector<SFBatch> take_applicable();
  /// Applies the batches in order, then the prox once. Throws
  /// DimensionError before touching W, DivergenceError afterwards.
  void apply_batches(std::span<const SFBatch> batches);
  /// Advances tau and the own-applied counter for applied batches.
  void record_applied(std::span<const SFBatch> batches);
  /// take + apply + record. Returns the number of batches applied.
  std::size_t apply_pending();

 private:
  std::uint64_t applicable_upto() const;

  WorkerOptions options_;
  std::vector<Sample> shard_;
  std::unique_ptr<ModelPlugin> plugin_;
  MinibatchSampler sampler_;
  ParamMatrix w_;
  ClockTable clocks_;
  std::uint64_t own_applied_ = 0;
  std::deque<SFBatch> queue_;
  LogSink log_;
};

/// Entries above this magnitude count as divergence.
inline constexpr double kDivergenceLimit = 1e12;

/// Throws DivergenceError when W has a non-finite or huge entry.
void check_divergence(const ParamMatrix& w, WorkerId worker);

}  // namespace sfb
