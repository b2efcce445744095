#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stwind/data.hpp"
#include "stwind/mesh.hpp"
#include "stwind/model.hpp"

namespace stwind {

/// Default truth for the simulation study. Only the range (62.1 km) has an
/// external source; the rest are working assumptions.
struct SimulationTruth {
  Hyperparameters theta{.sigma_e2 = 0.01, .sigma_nu2 = 0.1, .rho1 = 0.9, .rho2 = 0.7, .sigma_w2 = 1.0,
                        .kappa = 2.8284271247461903 / 62.1};
  double b0 = -1.0;

  friend bool operator==(const SimulationTruth&, const SimulationTruth&) = default;
};

struct SimulationOptions {
  Index knot_spacing = 12;
  MeshOptions mesh;
  std::int64_t start_time = 1230768000;  // 2009-01-01T00:00:00Z
  std::int64_t step_seconds = 900;
};

/// n points uniform on [0, width] x [0, height].
std::vector<Point> uniform_locations(Index n, double width, double height, std::uint64_t seed);

/// Draws one ST+T data set: AR(1) field weights over knots spanning t_steps,
/// per-farm stationary AR(1) chains, intercept b0 and Gaussian noise on the
/// logit scale, then inv_logit. Unit capacities.
Portfolio simulate_stt(const SimulationTruth& truth, std::span<const Point> locations, Index t_steps,
                       std::uint64_t seed, const SimulationOptions& options = {});

/// Field draw alone: knots x vertices, from the mesh's SPDE precision.
Eigen::MatrixXd simulate_field(const Mesh& mesh, const Hyperparameters& theta, Index n_knots, std::uint64_t seed);

}  // namespace stwind
