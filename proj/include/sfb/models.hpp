#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sfb/tensor.hpp"

namespace sfb {

/// Values double as the model id byte on the wire.
enum class ModelKind : std::uint8_t { kMlr = 1, kL2Mlr = 2, kDml = 3, kSc = 4 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct SparseCodeConfig {
  int max_iters = 200;
  double tolerance = 1e-6;
};

/// Matrix shape per model:
///   MLR / L2-MLR  rows = J classes,        cols = D features
///   DML           rows = k latent dims,    cols = d feature dims
///   SC            rows = D feature dims,   cols = J dictionary atoms
struct ModelSpec {
  ModelKind kind = ModelKind::kMlr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// L2-MLR regularization strength; SC sparse-code penalty.
  double lambda = 0.0;
  /// DML hinge margin for dissimilar pairs.
  double margin = 1.0;
  SparseCodeConfig sparse_code;
  /// Damping of the SDCA dual step, in (0, 1].
  double sdca_theta = 0.5;

  /// Length of Sample::features this model consumes.
  std::size_t feature_dim() const { return kind == ModelKind::kSc ? rows : cols; }
  bool uses_sdca() const { return kind == ModelKind::kL2Mlr; }
  void validate() const;
};

struct ClassLabel {
  std::uint32_t id = 0;
  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};
enum class Similarity : std::uint8_t { kSimilar, kDissimilar };
using Label = std::variant<std::monostate, ClassLabel, Similarity>;

/// One training example. DML samples carry the difference of the two feature
/// vectors of the pair; SC samples carry the signal to encode.
struct Sample {
  Vec64 features;
  Label label;
};

std::vector<double> softmax(std::span<const double> logits);

// ---- stochastic-gradient factor computations -------------------------------

/// u = softmax(W a) - e_y, v = a.
SFPair mlr_sf(const ParamMatrix& w, const Sample& s);

/// z = W a. Similar pairs: u = 2z. Dissimilar pairs: u = -2z while the hinge
/// is active (|z|^2 < margin), otherwise no pair. v = a.
std::optional<SFPair> dml_sf(const ParamMatrix& w, const Sample& s, double margin);

/// ISTA for argmin_a 0.5 |x - B a|^2 + lambda |a|_1, step 1 / (power-iteration
/// estimate of |B^T B|_2). Stops on relative objective change < tolerance or
/// after max_iters. When objective_trace is given it receives the objective
/// at the start and after every iteration.
Vec64 solve_sparse_code(const ParamMatrix& dictionary, const Vec64& x, double lambda,
                        const SparseCodeConfig& cfg,
                        std::vector<double>* objective_trace = nullptr);

/// Largest eigenvalue of B^T B by power iteration.
double estimate_lipschitz(const ParamMatrix& dictionary, int iterations = 100);

/// a = code(x); u = B a - x, v = a.
SFPair sc_sf(const ParamMatrix& dictionary, const Sample& s, double lambda,
             const SparseCodeConfig& cfg);

/// Same with a precomputed code: the gradient of 0.5 |B a - x|^2 in B.
SFPair sc_sf_with_code(const ParamMatrix& dictionary, const Sample& s, const Vec64& code);

/// Rescales every column whose l2 norm exceeds 1 onto the unit sphere.
void sc_prox(ParamMatrix& dictionary);

// ---- SDCA for L2-regularized MLR ------------------------------------------

/// Per-sample dual vectors u_i (length J), indexed by local sample index.
class SdcaDuals {
 public:
  SdcaDuals() = default;
  SdcaDuals(std::size_t samples, std::size_t classes)
      : classes_(classes), u_(samples, std::vector<double>(classes, 0.0)) {}

  std::size_t size() const { return u_.size(); }
  std::size_t classes() const { return classes_; }
  std::span<const double> operator[](std::size_t i) const { return u_.at(i); }
  std::span<double> mutable_dual(std::size_t i) { return u_.at(i); }

 private:
  std::size_t classes_ = 0;
  std::vector<std::vector<double>> u_;
};

/// W = Z / lambda elementwise; the primal matrix is always derived.
ParamMatrix sdca_primal(const ParamMatrix& z, double lambda);

/// One damped dual coordinate step on sample i against the current primal W.
/// g = softmax(W a) - e_y, du = theta (u_i + g), u_i -= du. Returns the pair
/// (du / N, a); applying it with coeff -1 performs Z -= (1/N) du a^T.
SFPair sdca_dual_step(SdcaDuals& duals, std::size_t i, const ParamMatrix& primal,
                      const Sample& s, double theta, std::uint64_t n_total);

/// Single-machine SDCA state: auxiliary Z, the duals, and lambda.
struct SdcaState {
  ParamMatrix z;
  SdcaDuals duals;
  double lambda = 0.0;

  SdcaState(std::size_t classes, std::size_t features, std::size_t samples, double lambda);
  ParamMatrix primal() const { return sdca_primal(z, lambda); }
};

/// sdca_dual_step followed by the local Z update. Requires lambda > 0 and
/// 0 < theta <= 1.
SFPair sdca_l2mlr_step(SdcaState& state, std::size_t i, const Sample& s, double theta,
                       std::uint64_t n_total);

// ---- objectives -------------------------------------------------------------

/// f_i(W a_i) for one sample. For SC the code is recomputed with the
/// model's solver unless `frozen_code` is given; the result then includes
/// lambda |a|_1.
double sample_loss(const ModelSpec& spec, const ParamMatrix& w, const Sample& s,
                   const Vec64* frozen_code = nullptr);

/// (1/N) sum_i f_i(W a_i) + h(W). W is the primal matrix. For SC, +inf when a
/// dictionary column leaves the unit ball.
double objective(const ModelSpec& spec, const ParamMatrix& w, std::span<const Sample> data);

/// Common initializer W^0: zeros for MLR / L2-MLR (Z = 0 for SDCA), small
/// Gaussian for DML, random unit columns for SC.
ParamMatrix initial_params(const ModelSpec& spec, std::uint64_t seed);

// ---- engine plugin ------------------------------------------------------------

/// Model behaviour as seen by a worker. The worker's replicated matrix is W for
/// SGD models and Z for SDCA. Instances are confined to one worker.
class ModelPlugin {
 public:
  explicit ModelPlugin(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~ModelPlugin() = default;

  const ModelSpec& spec() const { return spec_; }

  /// Factor pairs for the sampled shard entries, against a stable view of the
  /// replicated matrix.
  virtual std::vector<SFPair> compute_pairs(const ParamMatrix& replicated,
                                            std::span<const Sample> shard,
                                            std::span<const std::size_t> picks) = 0;

  /// Scale for the committed batch: -lr * shard_size / K for SGD models.
  virtual double batch_coeff(double lr, std::size_t shard_size, std::size_t minibatch) const;

  /// Proximal operator on the replicated matrix, once per drain.
  virtual void prox(ParamMatrix& /*replicated*/) const {}

  /// The primal W for the replicated matrix.
  virtual ParamMatrix primal(const ParamMatrix& replicated) const { return replicated; }

 private:
  ModelSpec spec_;
};

class SdcaPlugin;

/// shard_size sizes SDCA dual storage; n_total is the global sample count.
std::unique_ptr<ModelPlugin> make_plugin(const ModelSpec& spec, std::size_t shard_size,
                                         std::uint64_t n_total);

/// Dual storage of an SDCA plugin; nullptr for SGD plugins.
const SdcaDuals* sdca_duals(const ModelPlugin& plugin);

}  // namespace sfb
