#include <stdexcept>

#include "sfb/error.hpp"
#include "sfb/models.hpp"

namespace sfb {

ParamMatrix sdca_primal(const ParamMatrix& z, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("SDCA requires lambda > 0");
  ParamMatrix w = z;
  for (double& x : w.data()) x /= lambda;
  return w;
}

SFPair sdca_dual_step(SdcaDuals& duals, std::size_t i, const ParamMatrix& primal,
                      const Sample& s, double theta, std::uint64_t n_total) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("SDCA theta must lie in (0, 1]");
  if (n_total == 0) throw std::invalid_argument("SDCA needs N > 0");
  if (duals.classes() != primal.rows()) throw DimensionError("SDCA dual length != classes");

  auto g = mlr_sf(primal, s).u.to_dense();
  auto u = duals.mutable_dual(i);
  std::vector<double> scaled(g.size());
  const double inv_n = 1.0 / static_cast<double>(n_total);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double du = theta * (u[k] + g[k]);
    u[k] -= du;
    scaled[k] = du * inv_n;
  }
  return {Vec64::dense(std::move(scaled)), s.features};
}

SdcaState::SdcaState(std::size_t classes, std::size_t features, std::size_t samples, double lam)
    : z(classes, features), duals(samples, classes), lambda(lam) {
  if (!(lam > 0.0)) throw ConfigError("SDCA requires lambda > 0");
}

SFPair sdca_l2mlr_step(SdcaState& state, std::size_t i, const Sample& s, double theta,
                       std::uint64_t n_total) {
  auto pair = sdca_dual_step(state.duals, i, state.primal(), s, theta, n_total);
  SFBatch local{{pair}, -1.0, 0, 1};
  apply_sf_batch(state.z, local);
  return pair;
}

}  // namespace sfb
