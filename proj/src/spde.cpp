#include "stwind/spde.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "stwind/error.hpp"

namespace stwind {

FemMatrices fem_matrices(const Mesh& mesh) {
  const Index n = mesh.n_vertices();
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(9 * mesh.n_triangles()));
  const auto& v = mesh.vertices();
  for (Index t = 0; t < mesh.n_triangles(); ++t) {
    const auto& tri = mesh.triangles()[static_cast<std::size_t>(t)];
    const double area = mesh.triangle_area(t);
    // Edge opposite each vertex; grad(phi_i) is that edge rotated by 90 degrees / (2 area).
    const std::array<Point, 3> e = {v[tri[2]] - v[tri[1]], v[tri[0]] - v[tri[2]], v[tri[1]] - v[tri[0]]};
    for (int i = 0; i < 3; ++i) {
      mass[tri[i]] += area / 3.0;
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(tri[i], tri[j], (e[i].x * e[j].x + e[i].y * e[j].y) / (4.0 * area));
    }
  }
  SparseMatrix g(n, n);
  g.setFromTriplets(trip.begin(), trip.end());
  const SparseMatrix gcg = g * mass.cwiseInverse().asDiagonal() * g;
  return {std::move(mass), std::move(g), gcg.pruned(0.0)};
}

double MaternParams::range() const { return range_from_kappa(kappa); }

MaternParams MaternParams::from_range(double sigma_w2, double range) {
  return {sigma_w2, kappa_from_range(range)};
}

double kappa_from_range(double range) { return std::sqrt(8.0) / range; }
double range_from_kappa(double kappa) { return std::sqrt(8.0) / kappa; }

double matern_correlation(double h, double kappa) {
  if (h < 0.0 || !(kappa > 0.0)) throw DomainError("matern_correlation requires h >= 0, kappa > 0");
  const double u = kappa * h;
  if (u == 0.0) return 1.0;
  if (u > 700.0) return 0.0;
  return u * std::cyl_bessel_k(1.0, u);
}

double tau_from_sigma(double sigma_w2, double kappa) {
  if (!(sigma_w2 > 0.0) || !(kappa > 0.0)) throw DomainError("tau_from_sigma requires positive arguments");
  return 1.0 / std::sqrt(4.0 * std::numbers::pi * kappa * kappa * sigma_w2);
}

bool is_symmetric(const SparseMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const SparseMatrix d = m - SparseMatrix(m.transpose());
  for (Index k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it)
      if (std::abs(it.value()) > tol) return false;
  return true;
}

bool is_positive_definite(const SparseMatrix& m) {
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt(m);
  return llt.info() == Eigen::Success;
}

SparsePrecision spatial_precision(const FemMatrices& fem, double kappa, double tau) {
  if (!(kappa > 0.0) || !(tau > 0.0)) throw DomainError("spatial_precision requires kappa, tau > 0");
  const double k2 = kappa * kappa;
  SparseMatrix c(fem.size(), fem.size());
  c.reserve(Eigen::VectorXi::Ones(fem.size()));
  for (Index i = 0; i < fem.size(); ++i) c.insert(i, i) = fem.mass[i];
  SparseMatrix q = (tau * tau) * (k2 * k2 * c + 2.0 * k2 * fem.stiffness + fem.stiffness_sq);
  if (!is_positive_definite(q)) {
    std::ostringstream msg;
    msg << "spatial precision failed Cholesky (kappa=" << kappa << ", tau=" << tau
        << ", mass ratio max/min=" << fem.mass.maxCoeff() / fem.mass.minCoeff() << ")";
    throw IllConditionedError(msg.str());
  }
  return q;
}

SparsePrecision ar1_precision(Index n, double rho, double innovation_var) {
  if (n < 1) throw ArgumentError("AR(1) precision needs at least one time point");
  if (!(std::abs(rho) < 1.0)) throw NonstationaryError("AR(1) requires |rho| < 1");
  if (!(innovation_var > 0.0)) throw DomainError("AR(1) innovation variance must be positive");
  SparseMatrix q(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  if (n == 1) {
    trip.emplace_back(0, 0, (1.0 - rho * rho) / innovation_var);
  } else {
    for (Index t = 0; t < n; ++t) {
      const bool end = (t == 0 || t == n - 1);
      trip.emplace_back(t, t, (end ? 1.0 : 1.0 + rho * rho) / innovation_var);
      if (t + 1 < n) {
        trip.emplace_back(t, t + 1, -rho / innovation_var);
        trip.emplace_back(t + 1, t, -rho / innovation_var);
      }
    }
  }
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

SparsePrecision spacetime_precision(const SparsePrecision& q_space, const SparsePrecision& q_time) {
  SparseMatrix out = Eigen::kroneckerProduct(q_time, q_space);
  return out;
}

KnotGrid knots_covering(Index n_steps, Index spacing) {
  if (n_steps < 1 || spacing < 1) throw ArgumentError("knot grid needs n_steps >= 1 and spacing >= 1");
  return {(n_steps - 1 + spacing - 1) / spacing + 1, static_cast<double>(spacing)};
}

std::vector<TimeWeight> temporal_weights(const KnotGrid& knots, double t) {
  const double tol = 1e-9 * knots.spacing;
  if (t < -tol || t > knots.last() + tol) {
    std::ostringstream msg;
    msg << "time " << t << " outside knot span [0, " << knots.last() << "]";
    throw ExtrapolationError(msg.str());
  }
  const double u = std::clamp(t / knots.spacing, 0.0, static_cast<double>(knots.n_knots - 1));
  const auto k = static_cast<Index>(std::floor(u));
  const double frac = u - static_cast<double>(k);
  if (k >= knots.n_knots - 1 || frac == 0.0) return {{k, 1.0}};
  return {{k, 1.0 - frac}, {k + 1, frac}};
}

std::vector<std::vector<BasisWeight>> spatial_weights(const Mesh& mesh, std::span<const Point> locations) {
  std::vector<std::vector<BasisWeight>> out;
  out.reserve(locations.size());
  for (auto p : locations) {
    auto w = mesh.locate(p);
    if (!w) {
      std::ostringstream msg;
      msg << "location (" << p.x << ", " << p.y << ") lies outside the mesh";
      throw CoverageError(msg.str());
    }
    out.push_back(std::move(*w));
  }
  return out;
}

Projector build_projector(const Mesh& mesh, std::span<const Point> locations, const KnotGrid& knots,
                          std::span<const double> obs_times) {
  const auto sw = spatial_weights(mesh, locations);
  std::vector<std::vector<TimeWeight>> tw;
  for (double t : obs_times) tw.push_back(temporal_weights(knots, t));
  const Index n_t = static_cast<Index>(obs_times.size());
  const Index k = mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t j = 0; j < sw.size(); ++j)
    for (Index t = 0; t < n_t; ++t)
      for (const auto& s : sw[j])
        for (const auto& w : tw[static_cast<std::size_t>(t)])
          trip.emplace_back(static_cast<Index>(j) * n_t + t, w.knot * k + s.vertex, s.weight * w.weight);
  Projector p{SparseMatrix(static_cast<Index>(sw.size()) * n_t, k * knots.n_knots), static_cast<Index>(sw.size()),
              n_t};
  p.matrix.setFromTriplets(trip.begin(), trip.end());
  return p;
}

}  // namespace stwind
