#include "sfb/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sfb/error.hpp"
#include "sfb/rng.hpp"

namespace sfb {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMlr: return "mlr";
    case ModelKind::kL2Mlr: return "l2mlr";
    case ModelKind::kDml: return "dml";
    case ModelKind::kSc: return "sc";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "mlr") return ModelKind::kMlr;
  if (name == "l2mlr") return ModelKind::kL2Mlr;
  if (name == "dml") return ModelKind::kDml;
  if (name == "sc") return ModelKind::kSc;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (rows == 0 || cols == 0) throw ConfigError("model matrix dimensions must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (kind == ModelKind::kL2Mlr && lambda <= 0.0) {
    throw ConfigError("l2mlr (SDCA) requires lambda > 0: h must be strongly convex");
  }
  if (kind == ModelKind::kDml && !(margin > 0.0)) throw ConfigError("dml margin must be > 0");
  if (kind == ModelKind::kL2Mlr && !(sdca_theta > 0.0 && sdca_theta <= 1.0)) {
    throw ConfigError("sdca theta must lie in (0, 1]");
  }
  if (sparse_code.max_iters <= 0) throw ConfigError("sparse-code max_iters must be positive");
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : p) x /= z;
  return p;
}

namespace {

std::uint32_t class_of(const Sample& s, std::size_t classes) {
  const auto* y = std::get_if<ClassLabel>(&s.label);
  if (y == nullptr) throw std::invalid_argument("sample has no class label");
  if (y->id >= classes) {
    throw std::out_of_range("class label " + std::to_string(y->id) + " out of range [0," +
                            std::to_string(classes) + ")");
  }
  return y->id;
}

Similarity similarity_of(const Sample& s) {
  const auto* f = std::get_if<Similarity>(&s.label);
  if (f == nullptr) throw std::invalid_argument("DML sample has no similarity flag");
  return *f;
}

void check_features(const ParamMatrix& w, const Sample& s) {
  if (s.features.dim() != w.cols()) {
    throw DimensionError("feature length " + std::to_string(s.features.dim()) +
                         " != matrix cols " + std::to_string(w.cols()));
  }
}

double squared(std::span<const double> z) {
  double s = 0.0;
  for (double x : z) s += x * x;
  return s;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

SFPair mlr_sf(const ParamMatrix& w, const Sample& s) {
  check_features(w, s);
  const auto y = class_of(s, w.rows());
  auto g = softmax(multiply(w, s.features));
  g[y] -= 1.0;
  return {Vec64::dense(std::move(g)), s.features};
}

std::optional<SFPair> dml_sf(const ParamMatrix& w, const Sample& s, double margin) {
  check_features(w, s);
  auto z = multiply(w, s.features);
  double scale = 2.0;
  if (similarity_of(s) == Similarity::kDissimilar) {
    if (squared(z) >= margin) return std::nullopt;
    scale = -2.0;
  }
  for (double& x : z) x *= scale;
  return SFPair{Vec64::compact(z), s.features};
}

SFPair sc_sf_with_code(const ParamMatrix& dictionary, const Sample& s, const Vec64& code) {
  if (s.features.dim() != dictionary.rows()) throw DimensionError("signal length != dictionary rows");
  if (code.dim() != dictionary.cols()) throw DimensionError("code length != dictionary cols");
  auto r = multiply(dictionary, code);
  s.features.for_each_stored([&](std::size_t i, double x) { r[i] -= x; });
  return {Vec64::compact(r), code};
}

SFPair sc_sf(const ParamMatrix& dictionary, const Sample& s, double lambda,
             const SparseCodeConfig& cfg) {
  auto code = solve_sparse_code(dictionary, s.features, lambda, cfg);
  return sc_sf_with_code(dictionary, s, code);
}

void sc_prox(ParamMatrix& dictionary) {
  for (std::size_t c = 0; c < dictionary.cols(); ++c) {
    double sq = 0.0;
    for (std::size_t r = 0; r < dictionary.rows(); ++r) sq += dictionary(r, c) * dictionary(r, c);
    const double norm = std::sqrt(sq);
    if (norm > 1.0) {
      for (std::size_t r = 0; r < dictionary.rows(); ++r) dictionary(r, c) /= norm;
    }
  }
}

double sample_loss(const ModelSpec& spec, const ParamMatrix& w, const Sample& s,
                   const Vec64* frozen_code) {
  switch (spec.kind) {
    case ModelKind::kMlr:
    case ModelKind::kL2Mlr: {
      check_features(w, s);
      const auto y = class_of(s, w.rows());
      const auto z = multiply(w, s.features);
      return log_sum_exp(z) - z[y];
    }
    case ModelKind::kDml: {
      check_features(w, s);
      const double d = squared(multiply(w, s.features));
      return similarity_of(s) == Similarity::kSimilar ? d : std::max(0.0, spec.margin - d);
    }
    case ModelKind::kSc: {
      Vec64 code = frozen_code != nullptr
                       ? *frozen_code
                       : solve_sparse_code(w, s.features, spec.lambda, spec.sparse_code);
      auto r = multiply(w, code);
      s.features.for_each_stored([&](std::size_t i, double x) { r[i] -= x; });
      double l1 = 0.0;
      for (double a : code.values()) l1 += std::abs(a);
      return 0.5 * squared(r) + spec.lambda * l1;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double objective(const ModelSpec& spec, const ParamMatrix& w, std::span<const Sample> data) {
  if (w.rows() != spec.rows || w.cols() != spec.cols) throw DimensionError("objective: matrix shape != model spec");
  if (spec.kind == ModelKind::kSc) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      double sq = 0.0;
      for (std::size_t r = 0; r < w.rows(); ++r) sq += w(r, c) * w(r, c);
      if (std::sqrt(sq) > 1.0 + 1e-9) return std::numeric_limits<double>::infinity();
    }
  }
  // Neumaier summation: the mean of N equal losses comes back as that loss.
  double total = 0.0;
  double carry = 0.0;
  for (const auto& s : data) {
    const double x = sample_loss(spec, w, s);
    const double t = total + x;
    carry += std::abs(total) >= std::abs(x) ? (total - t) + x : (x - t) + total;
    total = t;
  }
  double obj = data.empty() ? 0.0 : (total + carry) / static_cast<double>(data.size());
  if (spec.kind == ModelKind::kL2Mlr) obj += 0.5 * spec.lambda * squared(w.data());
  return obj;
}

ParamMatrix initial_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamMatrix w(spec.rows, spec.cols);
  Rng rng(seed ^ 0x5fb0'1717ULL);
  switch (spec.kind) {
    case ModelKind::kMlr:
    case ModelKind::kL2Mlr:
      break;
    case ModelKind::kDml: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(spec.cols));
      for (double& x : w.data()) x = scale * rng.normal();
      break;
    }
    case ModelKind::kSc: {
      for (double& x : w.data()) x = rng.normal();
      for (std::size_t c = 0; c < w.cols(); ++c) {
        double sq = 0.0;
        for (std::size_t r = 0; r < w.rows(); ++r) sq += w(r, c) * w(r, c);
        const double norm = std::sqrt(sq);
        for (std::size_t r = 0; r < w.rows(); ++r) w(r, c) = norm > 0 ? w(r, c) / norm : 0.0;
      }
      break;
    }
  }
  return w;
}

// ---- plugins -------------------------------------------------------------------

double ModelPlugin::batch_coeff(double lr, std::size_t shard_size, std::size_t minibatch) const {
  return -lr * static_cast<double>(shard_size) / static_cast<double>(minibatch);
}

namespace {

class MlrPlugin final : public ModelPlugin {
 public:
  using ModelPlugin::ModelPlugin;
  std::vector<SFPair> compute_pairs(const ParamMatrix& w, std::span<const Sample> shard,
                                    std::span<const std::size_t> picks) override {
    std::vector<SFPair> out;
    out.reserve(picks.size());
    for (auto i : picks) out.push_back(mlr_sf(w, shard[i]));
    return out;
  }
};

class DmlPlugin final : public ModelPlugin {
 public:
  using ModelPlugin::ModelPlugin;
  std::vector<SFPair> compute_pairs(const ParamMatrix& w, std::span<const Sample> shard,
                                    std::span<const std::size_t> picks) override {
    std::vector<SFPair> out;
    for (auto i : picks) {
      if (auto p = dml_sf(w, shard[i], spec().margin)) out.push_back(std::move(*p));
    }
    return out;
  }
};

class ScPlugin final : public ModelPlugin {
 public:
  using ModelPlugin::ModelPlugin;
  std::vector<SFPair> compute_pairs(const ParamMatrix& b, std::span<const Sample> shard,
                                    std::span<const std::size_t> picks) override {
    std::vector<SFPair> out;
    out.reserve(picks.size());
    for (auto i : picks) out.push_back(sc_sf(b, shard[i], spec().lambda, spec().sparse_code));
    return out;
  }
  void prox(ParamMatrix& b) const override { sc_prox(b); }
};

}  // namespace

class SdcaPlugin final : public ModelPlugin {
 public:
  SdcaPlugin(ModelSpec spec, std::size_t shard_size, std::uint64_t n_total)
      : ModelPlugin(std::move(spec)), duals_(shard_size, this->spec().rows), n_total_(n_total) {}

  std::vector<SFPair> compute_pairs(const ParamMatrix& z, std::span<const Sample> shard,
                                    std::span<const std::size_t> picks) override {
    const auto w = primal(z);
    std::vector<SFPair> out;
    out.reserve(picks.size());
    for (auto i : picks) {
      out.push_back(sdca_dual_step(duals_, i, w, shard[i], spec().sdca_theta, n_total_));
    }
    return out;
  }
  double batch_coeff(double, std::size_t, std::size_t) const override { return -1.0; }
  ParamMatrix primal(const ParamMatrix& z) const override { return sdca_primal(z, spec().lambda); }

  const SdcaDuals& duals() const { return duals_; }

 private:
  SdcaDuals duals_;
  std::uint64_t n_total_;
};

std::unique_ptr<ModelPlugin> make_plugin(const ModelSpec& spec, std::size_t shard_size,
                                         std::uint64_t n_total) {
  spec.validate();
  switch (spec.kind) {
    case ModelKind::kMlr: return std::make_unique<MlrPlugin>(spec);
    case ModelKind::kL2Mlr: return std::make_unique<SdcaPlugin>(spec, shard_size, n_total);
    case ModelKind::kDml: return std::make_unique<DmlPlugin>(spec);
    case ModelKind::kSc: return std::make_unique<ScPlugin>(spec);
  }
  throw ConfigError("unknown model kind");
}

const SdcaDuals* sdca_duals(const ModelPlugin& plugin) {
  const auto* p = dynamic_cast<const SdcaPlugin*>(&plugin);
  return p != nullptr ? &p->duals() : nullptr;
}

}  // namespace sfb
