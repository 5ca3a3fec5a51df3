#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfb/error.hpp"
#include "sfb/harness.hpp"
#include "sfb/rng.hpp"

namespace sfb {

namespace {

std::vector<double> unit_vector(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double norm = 0.0;
  while (norm == 0.0) {
    for (auto& x : v) x = rng.normal();
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  }
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<double> noisy(Rng& rng, const std::vector<double>& center, double noise) {
  auto x = center;
  if (noise > 0.0) {
    for (auto& e : x) e += noise * rng.normal();
  }
  return x;
}

}  // namespace

ModelSpec synthetic_spec(ModelKind kind, std::size_t j, std::size_t d) {
  ModelSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ModelKind::kMlr:
    case ModelKind::kDml:
      spec.rows = j;
      spec.cols = d;
      break;
    case ModelKind::kL2Mlr:
      spec.rows = j;
      spec.cols = d;
      spec.lambda = 0.1;
      break;
    case ModelKind::kSc:
      spec.rows = d;
      spec.cols = j;
      spec.lambda = 0.001;
      break;
  }
  return spec;
}

std::vector<Sample> gen_synthetic(ModelKind kind, std::size_t j, std::size_t d, std::size_t n,
                                  std::uint64_t seed, double noise) {
  if (j == 0 || d == 0) throw ConfigError("synthetic data needs J, D > 0");
  if (!(noise >= 0.0)) throw ConfigError("synthetic noise must be >= 0");
  Rng rng(mix_seed(seed) ^ static_cast<std::uint64_t>(kind));
  std::vector<Sample> out;
  out.reserve(n);

  switch (kind) {
    case ModelKind::kMlr:
    case ModelKind::kL2Mlr: {
      std::vector<std::vector<double>> centers;
      for (std::size_t k = 0; k < j; ++k) centers.push_back(unit_vector(rng, d));
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::uint32_t>(rng.index(j));
        out.push_back({Vec64::compact(noisy(rng, centers[y], noise)), ClassLabel{y}});
      }
      break;
    }
    case ModelKind::kDml: {
      // J is the latent dimension of the metric; the clusters live in R^D.
      const std::size_t clusters = std::max<std::size_t>(2, j);
      std::vector<std::vector<double>> centers;
      for (std::size_t k = 0; k < clusters; ++k) centers.push_back(unit_vector(rng, d));
      for (std::size_t i = 0; i < n; ++i) {
        const bool similar = rng.uniform() < 0.5;
        const auto a = rng.index(clusters);
        auto b = a;
        if (!similar) b = (a + 1 + rng.index(clusters - 1)) % clusters;
        const auto x1 = noisy(rng, centers[a], noise);
        const auto x2 = noisy(rng, centers[b], noise);
        std::vector<double> diff(d);
        for (std::size_t k = 0; k < d; ++k) diff[k] = x1[k] - x2[k];
        out.push_back({Vec64::compact(diff), similar ? Similarity::kSimilar : Similarity::kDissimilar});
      }
      break;
    }
    case ModelKind::kSc: {
      std::vector<std::vector<double>> atoms;
      for (std::size_t k = 0; k < j; ++k) atoms.push_back(unit_vector(rng, d));
      const std::size_t active = std::min<std::size_t>(3, j);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(d, 0.0);
        std::vector<std::size_t> chosen;
        while (chosen.size() < active) {
          const auto k = static_cast<std::size_t>(rng.index(j));
          if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) chosen.push_back(k);
        }
        for (auto k : chosen) {
          const double weight = rng.normal();
          for (std::size_t r = 0; r < d; ++r) x[r] += weight * atoms[k][r];
        }
        if (noise > 0.0) {
          for (auto& e : x) e += noise * rng.normal();
        }
        out.push_back({Vec64::compact(x), std::monostate{}});
      }
      break;
    }
  }
  return out;
}

}  // namespace sfb
