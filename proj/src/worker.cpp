#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfb/engine.hpp"
#include "sfb/error.hpp"

namespace sfb {

LrSchedule LrSchedule::constant(double eta) {
  LrSchedule s;
  s.kind = Kind::kConstant;
  s.eta = eta;
  s.validate();
  return s;
}

LrSchedule LrSchedule::decaying(double lf, double l, std::uint64_t s) {
  LrSchedule out;
  out.kind = Kind::kDecaying;
  out.lf = lf;
  out.l = l;
  out.s = s;
  out.validate();
  return out;
}

void LrSchedule::validate() const {
  if (kind == Kind::kConstant) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("learning rate must be positive and finite");
    return;
  }
  if (!(lf >= 0.0) || !(l >= 0.0) || !std::isfinite(lf) || !std::isfinite(l)) {
    throw ConfigError("decaying schedule needs L_F >= 0 and L >= 0");
  }
  if (lf == 0.0 && (l == 0.0 || s == 0)) {
    // 1 / sqrt(c) is unbounded at c = 0.
    throw ConfigError("decaying schedule needs L_F/2 + 2sL > 0");
  }
}

std::string LrSchedule::describe() const {
  std::ostringstream os;
  if (kind == Kind::kConstant) {
    os << "constant(" << eta << ")";
  } else {
    os << "decaying(L_F=" << lf << ", L=" << l << ", s=" << s << ")";
  }
  return os.str();
}

double lr(const LrSchedule& sched, std::uint64_t c) {
  if (sched.kind == LrSchedule::Kind::kConstant) return sched.eta;
  const double denom =
      sched.lf / 2.0 + 2.0 * static_cast<double>(sched.s) * sched.l + std::sqrt(static_cast<double>(c));
  return 1.0 / denom;
}

std::uint64_t worker_seed(std::uint64_t run_seed, WorkerId p) {
  return mix_seed(run_seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t{p} + 1)));
}

MinibatchSampler::MinibatchSampler(std::uint64_t seed, std::size_t shard_size)
    : rng_(seed), shard_size_(shard_size) {
  if (shard_size == 0) throw ConfigError("empty shard");
}

std::vector<std::size_t> MinibatchSampler::draw(std::size_t k) {
  std::vector<std::size_t> picks(k);
  for (auto& i : picks) i = static_cast<std::size_t>(rng_.index(shard_size_));
  return picks;
}

void check_divergence(const ParamMatrix& w, WorkerId worker) {
  if (!w.all_finite()) {
    throw DivergenceError("worker " + std::to_string(worker) + ": parameter matrix became non-finite");
  }
  if (w.max_abs() > kDivergenceLimit) {
    throw DivergenceError("worker " + std::to_string(worker) + ": parameter entry exceeds 1e12 (diverged)");
  }
}

Worker::Worker(WorkerOptions options, std::vector<Sample> shard, ParamMatrix initial)
    : options_(std::move(options)),
      shard_(std::move(shard)),
      plugin_(shard_.empty() ? nullptr : make_plugin(options_.spec, shard_.size(), options_.n_total)),
      sampler_(options_.seed, shard_.size()),
      w_(std::move(initial)),
      clocks_(options_.id, options_.workers, options_.sources) {
  if (options_.minibatch == 0) throw ConfigError("minibatch size must be positive");
  options_.lr.validate();
  if (w_.rows() != options_.spec.rows || w_.cols() != options_.spec.cols) {
    throw DimensionError("initial matrix does not match the model shape");
  }
}

bool Worker::ready(Staleness s) const {
  return own_applied_ == clocks_.own_clock() && may_proceed(clocks_, s);
}

SFBatch Worker::compute_batch() {
  const auto c = clocks_.own_clock();
  const auto picks = sampler_.draw(options_.minibatch);
  SFBatch batch;
  batch.pairs = plugin_->compute_pairs(w_, shard_, picks);
  batch.coeff = plugin_->batch_coeff(lr(options_.lr, c), shard_.size(), options_.minibatch);
  batch.sender = options_.id;
  batch.clock = c + 1;
  return batch;
}

void Worker::commit(const SFBatch& batch) {
  if (batch.sender != options_.id || batch.clock != clocks_.own_clock() + 1) {
    throw std::logic_error("commit of a batch that is not this worker's next iteration");
  }
  if (log_) log_(batch);
  clocks_.record_commit();
  queue_.push_back(batch);
}

SFBatch Worker::run_iteration() {
  auto batch = compute_batch();
  commit(batch);
  return batch;
}

void Worker::enqueue(SFBatch batch) {
  if (!clocks_.tracks(batch.sender)) {
    throw std::out_of_range("worker " + std::to_string(options_.id) + " got a batch from non-source " +
                            std::to_string(batch.sender));
  }
  check_batch_dims(batch, w_.rows(), w_.cols());
  queue_.push_back(std::move(batch));
}

std::uint64_t Worker::applicable_upto() const {
  const auto own = clocks_.own_clock();
  if (!options_.whole_rounds) return own;
  const std::size_t round_size = options_.sources.size() + 1;
  auto upto = std::min(own_applied_, own);
  for (auto r = upto + 1; r <= own; ++r) {
    const auto n = std::count_if(queue_.begin(), queue_.end(), [r](const SFBatch& b) { return b.clock == r; });
    if (static_cast<std::size_t>(n) < round_size) break;
    upto = r;
  }
  return upto;
}

bool Worker::has_applicable() const {
  const auto upto = applicable_upto();
  return std::any_of(queue_.begin(), queue_.end(), [upto](const SFBatch& b) { return b.clock <= upto; });
}

std::vector<SFBatch> Worker::take_applicable() {
  const auto own = applicable_upto();
  std::vector<SFBatch> out;
  std::deque<SFBatch> held;
  for (auto& b : queue_) {
    if (b.clock <= own) {
      out.push_back(std::move(b));
    } else {
      held.push_back(std::move(b));
    }
  }
  queue_.swap(held);
  std::stable_sort(out.begin(), out.end(), [](const SFBatch& a, const SFBatch& b) {
    return a.clock != b.clock ? a.clock < b.clock : a.sender < b.sender;
  });
  return out;
}

void Worker::apply_batches(std::span<const SFBatch> batches) {
  if (batches.empty()) return;
  for (const auto& b : batches) check_batch_dims(b, w_.rows(), w_.cols());
  for (const auto& b : batches) apply_sf_batch(w_, b);
  plugin_->prox(w_);
  check_divergence(w_, options_.id);
}

void Worker::record_applied(std::span<const SFBatch> batches) {
  for (const auto& b : batches) {
    if (b.sender == options_.id) {
      own_applied_ = std::max(own_applied_, b.clock);
      continue;
    }
    clocks_.record_applied(b.sender, b.clock);
    if (log_) log_(b);
  }
}

std::size_t Worker::apply_pending() {
  auto batches = take_applicable();
  apply_batches(batches);
  record_applied(batches);
  return batches.size();
}

}  // namespace sfb
