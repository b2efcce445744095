#include "stwind/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include <Eigen/SparseCholesky>

#include "stwind/error.hpp"
#include "stwind/rng.hpp"
#include "stwind/spde.hpp"
#include "stwind/transform.hpp"

namespace stwind {

std::vector<Point> uniform_locations(Index n, double width, double height, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(0.0, width), uy(0.0, height);
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double x = ux(rng);
    out.push_back({x, uy(rng)});
  }
  return out;
}

Eigen::MatrixXd simulate_field(const Mesh& mesh, const Hyperparameters& theta, Index n_knots, std::uint64_t seed) {
  const auto fem = fem_matrices(mesh);
  const SparseMatrix qs = spatial_precision(fem, theta.kappa, tau_from_sigma(theta.sigma_w2, theta.kappa));
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt(qs);
  if (llt.info() != Eigen::Success) throw IllConditionedError("spatial precision failed to factorize");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const Index k = mesh.n_vertices();
  auto innovation = [&] {
    Eigen::VectorXd z(k);
    for (Index i = 0; i < k; ++i) z[i] = normal(rng);
    return Eigen::VectorXd(llt.permutationPinv() * Eigen::VectorXd(llt.matrixU().solve(z)));
  };
  Eigen::MatrixXd w(n_knots, k);
  w.row(0) = innovation() / std::sqrt(1.0 - theta.rho2 * theta.rho2);
  for (Index t = 1; t < n_knots; ++t) w.row(t) = theta.rho2 * w.row(t - 1) + innovation().transpose();
  return w;
}

Portfolio simulate_stt(const SimulationTruth& truth, std::span<const Point> locations, Index t_steps,
                       std::uint64_t seed, const SimulationOptions& options) {
  if (t_steps < 2) throw ArgumentError("simulation needs at least 2 time steps");
  const auto& th = truth.theta;
  validate(th, ModelKind::kSTT);
  const Index n = static_cast<Index>(locations.size());
  const Mesh mesh = build_mesh(locations, options.mesh);
  const KnotGrid knots = knots_covering(t_steps, options.knot_spacing);
  const Eigen::MatrixXd w = simulate_field(mesh, th, knots.n_knots, derive_seed(seed, {0}));
  const auto sw = spatial_weights(mesh, locations);

  Rng rng(derive_seed(seed, {1}));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd power(n, t_steps);
  const double sd_nu = std::sqrt(th.sigma_nu2), sd_e = std::sqrt(th.sigma_e2);
  for (Index j = 0; j < n; ++j) {
    double u = normal(rng) * sd_nu / std::sqrt(1.0 - th.rho1 * th.rho1);
    for (Index t = 0; t < t_steps; ++t) {
      if (t > 0) u = th.rho1 * u + sd_nu * normal(rng);
      double field = 0.0;
      for (const auto& tw : temporal_weights(knots, static_cast<double>(t)))
        for (const auto& s : sw[static_cast<std::size_t>(j)]) field += tw.weight * s.weight * w(tw.knot, s.vertex);
      power(j, t) = inv_logit(truth.b0 + field + u + sd_e * normal(rng));
    }
  }

  std::vector<Farm> farms;
  char id[32];
  for (Index j = 0; j < n; ++j) {
    std::snprintf(id, sizeof id, "F%04ld", static_cast<long>(j));
    farms.push_back({id, locations[static_cast<std::size_t>(j)], 1.0});
  }
  std::vector<std::int64_t> times;
  for (Index t = 0; t < t_steps; ++t) times.push_back(options.start_time + t * options.step_seconds);
  return Portfolio(std::move(farms), std::move(times), std::move(power));
}

}  // namespace stwind
