#include <algorithm>
#include <cmath>

#include "sfb/error.hpp"
#include "sfb/models.hpp"

namespace sfb {

namespace {

double lasso_objective(const ParamMatrix& b, std::span<const double> x, std::span<const double> a,
                       double lambda) {
  const auto ba = multiply(b, a);
  double fit = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) fit += (ba[i] - x[i]) * (ba[i] - x[i]);
  double l1 = 0.0;
  for (double v : a) l1 += std::abs(v);
  return 0.5 * fit + lambda * l1;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

double estimate_lipschitz(const ParamMatrix& b, int iterations) {
  const std::size_t n = b.cols();
  if (n == 0) return 0.0;
  std::vector<double> v(n);
  // Non-uniform start so the iterate is unlikely to be orthogonal to the top
  // eigenvector.
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (double& x : v) x /= norm;
    auto next = multiply_transposed(b, multiply(b, std::span<const double>(v)));
    double next_norm = 0.0;
    for (double x : next) next_norm += x * x;
    next_norm = std::sqrt(next_norm);
    const bool settled = std::abs(next_norm - estimate) <= 1e-12 * next_norm;
    estimate = next_norm;
    v = std::move(next);
    if (settled) break;
  }
  return estimate;
}

Vec64 solve_sparse_code(const ParamMatrix& b, const Vec64& x_in, double lambda,
                        const SparseCodeConfig& cfg, std::vector<double>* trace) {
  if (x_in.dim() != b.rows()) throw DimensionError("sparse code: signal length != dictionary rows");
  if (!b.all_finite()) throw NonFiniteError("sparse code: dictionary has non-finite entries");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw NonFiniteError("sparse code: bad lambda");

  const auto x = x_in.to_dense();
  std::vector<double> a(b.cols(), 0.0);
  double f = lasso_objective(b, x, a, lambda);
  if (trace != nullptr) trace->assign(1, f);

  double lip = estimate_lipschitz(b);
  if (lip <= 0.0 || f == 0.0) return Vec64::compact(a);

  std::vector<double> next(a.size());
  for (int it = 0; it < cfg.max_iters; ++it) {
    const auto residual = [&] {
      auto r = multiply(b, std::span<const double>(a));
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= x[i];
      return r;
    }();
    const auto grad = multiply_transposed(b, residual);
    double f_next;
    // A power-iteration underestimate of the Lipschitz constant can overshoot;
    // double it until the step descends.
    for (;;) {
      for (std::size_t j = 0; j < a.size(); ++j) {
        next[j] = soft_threshold(a[j] - grad[j] / lip, lambda / lip);
      }
      f_next = lasso_objective(b, x, next, lambda);
      if (f_next <= f || lip > 1e300) break;
      lip *= 2.0;
    }
    a.swap(next);
    const double change = std::abs(f - f_next) / std::max(std::abs(f), 1e-300);
    f = f_next;
    if (trace != nullptr) trace->push_back(f);
    if (change < cfg.tolerance) break;
  }
  return Vec64::compact(a);
}

}  // namespace sfb
