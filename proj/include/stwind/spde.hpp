#pragma once

#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "stwind/mesh.hpp"

namespace stwind {

using SparseMatrix = Eigen::SparseMatrix<double>;
/// Symmetric positive-definite sparse precision (full storage).
using SparsePrecision = SparseMatrix;

/// Piecewise-linear finite element matrices on a mesh.
struct FemMatrices {
  Eigen::VectorXd mass;  // lumped mass, diagonal of C
  SparseMatrix stiffness;  // G
  SparseMatrix stiffness_sq;  // G C^-1 G

  Index size() const { return mass.size(); }
};

FemMatrices fem_matrices(const Mesh& mesh);

/// Matern smoothness-1 parameters. Range is sqrt(8) / kappa.
struct MaternParams {
  double sigma_w2 = 1.0;
  double kappa = 1.0;

  double range() const;
  static MaternParams from_range(double sigma_w2, double range);
};

double kappa_from_range(double range);
double range_from_kappa(double kappa);

/// (kappa h) K_1(kappa h); 1 at h = 0.
double matern_correlation(double h, double kappa);

/// tau such that the stationary marginal variance of the alpha = 2 field is sigma_w2.
double tau_from_sigma(double sigma_w2, double kappa);

/// tau^2 (kappa^4 C + 2 kappa^2 G + G C^-1 G). Throws IllConditionedError when
/// the result fails a Cholesky factorization.
SparsePrecision spatial_precision(const FemMatrices& fem, double kappa, double tau);

/// Stationary AR(1) precision over `n` time points.
SparsePrecision ar1_precision(Index n, double rho, double innovation_var);

/// Q_time (x) Q_space; latent vector ordered time-major (all vertices at the
/// first knot, then the next knot, ...).
SparsePrecision spacetime_precision(const SparsePrecision& q_space, const SparsePrecision& q_time);

/// Equally spaced knots at times 0, spacing, 2 spacing, ... (in steps).
struct KnotGrid {
  Index n_knots = 1;
  double spacing = 12.0;

  double last() const { return spacing * static_cast<double>(n_knots - 1); }
};

/// Knots covering [0, n_steps - 1]: ceil((n_steps - 1) / spacing) + 1 of them.
KnotGrid knots_covering(Index n_steps, Index spacing);

struct TimeWeight {
  Index knot;
  double weight;
};

/// Linear interpolation weights between the two knots bracketing t.
std::vector<TimeWeight> temporal_weights(const KnotGrid& knots, double t);

/// Barycentric weights for each location. Throws CoverageError for locations
/// outside the mesh.
std::vector<std::vector<BasisWeight>> spatial_weights(const Mesh& mesh, std::span<const Point> locations);

/// Maps (vertex x knot) field weights to (location x time) values. Rows are
/// location-major: row = location * n_times + time.
struct Projector {
  SparseMatrix matrix;
  Index n_locations = 0;
  Index n_times = 0;
};

Projector build_projector(const Mesh& mesh, std::span<const Point> locations, const KnotGrid& knots,
                          std::span<const double> obs_times);

bool is_symmetric(const SparseMatrix& m, double tol = 0.0);
/// Cholesky-based positive-definiteness test.
bool is_positive_definite(const SparseMatrix& m);

}  // namespace stwind
