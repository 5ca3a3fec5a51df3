#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's numeric kernels; inputs are converted to plain dense arrays.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "sfb/engine.hpp"
#include "sfb/models.hpp"
#include "sfb/tensor.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense to_dense(const sfb::ParamMatrix& m) {
  Dense d = zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) d[i][j] = m(i, j);
  return d;
}

inline std::vector<double> dense_of(const sfb::Vec64& v) {
  std::vector<double> out(v.dim(), 0.0);
  if (!v.is_sparse()) {
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v.values()[i];
  } else {
    for (std::size_t k = 0; k < v.nnz(); ++k) out[v.indices()[k]] = v.values()[k];
  }
  return out;
}

/// coeff * sum_k u_k v_k^T by explicit triple loop.
inline Dense outer_sum(const sfb::SFBatch& b, std::size_t rows, std::size_t cols) {
  Dense d = zeros(rows, cols);
  for (const auto& p : b.pairs) {
    const auto u = dense_of(p.u);
    const auto v = dense_of(p.v);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) d[i][j] += (b.coeff * u[i]) * v[j];
  }
  return d;
}

inline double frobenius(const Dense& a, const Dense& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) s += (a[i][j] - b[i][j]) * (a[i][j] - b[i][j]);
  return std::sqrt(s);
}

inline std::vector<double> matvec(const Dense& w, const std::vector<double>& a) {
  std::vector<double> z(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) z[i] += w[i][j] * a[j];
  return z;
}

inline double log_sum_exp(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

inline double cross_entropy(const Dense& w, const sfb::Sample& s) {
  const auto z = matvec(w, dense_of(s.features));
  return log_sum_exp(z) - z[std::get<sfb::ClassLabel>(s.label).id];
}

/// softmax(W a) - e_y
inline std::vector<double> mlr_grad_u(const Dense& w, const sfb::Sample& s) {
  const auto z = matvec(w, dense_of(s.features));
  const double lse = log_sum_exp(z);
  std::vector<double> g(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) g[k] = std::exp(z[k] - lse);
  g[std::get<sfb::ClassLabel>(s.label).id] -= 1.0;
  return g;
}

/// (1/N) sum CE + lambda/2 |W|^2, one sample at a time.
inline double mlr_objective(const Dense& w, std::span<const sfb::Sample> data, double lambda = 0.0) {
  double total = 0.0;
  for (const auto& s : data) total += cross_entropy(w, s);
  double reg = 0.0;
  for (const auto& row : w)
    for (double x : row) reg += x * x;
  return total / static_cast<double>(data.size()) + 0.5 * lambda * reg;
}

/// Lasso objective 0.5 |x - B a|^2 + lambda |a|_1
inline double lasso_objective(const Dense& b, const std::vector<double>& x, const std::vector<double>& a,
                              double lambda) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double r = -x[i];
    for (std::size_t j = 0; j < a.size(); ++j) r += b[i][j] * a[j];
    r2 += r * r;
  }
  double l1 = 0.0;
  for (double v : a) l1 += std::abs(v);
  return 0.5 * r2 + lambda * l1;
}

/// Cyclic coordinate descent for the lasso; returns the code.
inline std::vector<double> lasso_cd(const Dense& b, const std::vector<double>& x, double lambda, int sweeps = 5000) {
  const std::size_t d = b.size();
  const std::size_t j = b.front().size();
  std::vector<double> a(j, 0.0);
  std::vector<double> r = x;  // r = x - B a
  for (int it = 0; it < sweeps; ++it) {
    double change = 0.0;
    for (std::size_t k = 0; k < j; ++k) {
      double col2 = 0.0;
      double rho = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        col2 += b[i][k] * b[i][k];
        rho += b[i][k] * (r[i] + b[i][k] * a[k]);
      }
      if (col2 == 0.0) continue;
      const double shrunk = std::copysign(std::max(std::abs(rho) - lambda, 0.0), rho) / col2;
      const double delta = shrunk - a[k];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < d; ++i) r[i] -= b[i][k] * delta;
        a[k] = shrunk;
        change = std::max(change, std::abs(delta));
      }
    }
    if (change < 1e-15) break;
  }
  return a;
}

/// Duality gap of L2-regularized softmax regression from the duals alone.
/// With q_i = e_y - u_i in the simplex and W = (1/(lambda N)) sum u_i a_i^T:
///   P = (1/N) sum CE(W a_i) + lambda/2 |W|^2
///   D = (1/N) sum H(q_i) - lambda/2 |W|^2
inline double sdca_gap(const sfb::SdcaDuals& duals, std::span<const sfb::Sample> data, std::size_t classes,
                       std::size_t features, double lambda) {
  const double n = static_cast<double>(data.size());
  Dense w = zeros(classes, features);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto a = dense_of(data[i].features);
    for (std::size_t r = 0; r < classes; ++r)
      for (std::size_t c = 0; c < features; ++c) w[r][c] += duals[i][r] * a[c] / (lambda * n);
  }
  double entropy = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto y = std::get<sfb::ClassLabel>(data[i].label).id;
    for (std::size_t r = 0; r < classes; ++r) {
      const double q = (r == y ? 1.0 : 0.0) - duals[i][r];
      if (q > 0.0) entropy -= q * std::log(q);
    }
  }
  double w2 = 0.0;
  for (const auto& row : w)
    for (double x : row) w2 += x * x;
  const double primal = mlr_objective(w, data, lambda);
  const double dual = entropy / n - 0.5 * lambda * w2;
  return primal - dual;
}

/// Sequential minibatch SGD on one machine: W -= eta |S| / K sum g a^T.
/// Uses the library's sampler for the picks only.
inline std::vector<Dense> sgd_trajectory(std::size_t classes, std::size_t features,
                                         std::span<const sfb::Sample> data, double eta, std::size_t k,
                                         std::uint64_t sampler_seed, std::uint64_t iters) {
  Dense w = zeros(classes, features);
  sfb::MinibatchSampler sampler(sampler_seed, data.size());
  std::vector<Dense> out{w};
  const double scale = eta * static_cast<double>(data.size()) / static_cast<double>(k);
  for (std::uint64_t t = 0; t < iters; ++t) {
    Dense step = zeros(classes, features);
    for (auto i : sampler.draw(k)) {
      const auto g = mlr_grad_u(w, data[i]);
      const auto a = dense_of(data[i].features);
      for (std::size_t r = 0; r < classes; ++r)
        for (std::size_t c = 0; c < features; ++c) step[r][c] += g[r] * a[c];
    }
    for (std::size_t r = 0; r < classes; ++r)
      for (std::size_t c = 0; c < features; ++c) w[r][c] -= scale * step[r][c];
    out.push_back(w);
  }
  return out;
}

/// Breadth-first reachability from every node over adjacency lists.
inline bool strongly_connected(const std::vector<std::vector<sfb::WorkerId>>& adj) {
  const std::size_t n = adj.size();
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> frontier{s};
    seen[s] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const auto v = frontier.back();
      frontier.pop_back();
      for (auto t : adj[v]) {
        if (!seen[t]) {
          seen[t] = true;
          ++count;
          frontier.push_back(t);
        }
      }
    }
    if (count != n) return false;
  }
  return true;
}

}  // namespace oracle
