#include <algorithm>
#include <cmath>

#include "sfb/harness.hpp"

namespace sfb {

double finite_diff_check(const ModelSpec& spec, const ParamMatrix& w, const Sample& s, double eps,
                         const Vec64* frozen_code) {
  Vec64 code;
  const Vec64* code_ptr = frozen_code;
  SFPair pair;
  switch (spec.kind) {
    case ModelKind::kMlr:
    case ModelKind::kL2Mlr:
      pair = mlr_sf(w, s);
      break;
    case ModelKind::kDml:
      if (auto p = dml_sf(w, s, spec.margin)) {
        pair = std::move(*p);
      } else {
        pair = {Vec64::zeros(w.rows()), s.features};
      }
      break;
    case ModelKind::kSc:
      if (code_ptr == nullptr) {
        code = solve_sparse_code(w, s.features, spec.lambda, spec.sparse_code);
        code_ptr = &code;
      }
      pair = sc_sf_with_code(w, s, *code_ptr);
      break;
  }
  const auto u = pair.u.to_dense();
  const auto v = pair.v.to_dense();

  ParamMatrix probe = w;
  double worst = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + eps;
      const double up = sample_loss(spec, probe, s, code_ptr);
      probe(i, j) = orig - eps;
      const double down = sample_loss(spec, probe, s, code_ptr);
      probe(i, j) = orig;
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, std::abs(numeric - u[i] * v[j]));
    }
  }
  return worst;
}

}  // namespace sfb
