#pragma once

#include <span>

#include <Eigen/Dense>

namespace stwind {

inline constexpr double kDefaultEpsilon = 1e-3;

/// min(max(x, eps), 1 - eps)
double clip_bounds(double x, double epsilon = kDefaultEpsilon);

/// ln(x / (1 - x)); throws DomainError outside (0, 1).
double logit(double x);

/// (1 + e^-y)^-1, evaluated without overflow for large |y|.
double inv_logit(double y);

/// Capacity-weighted mean sum_j c_j x_j / sum_j c_j.
double aggregate(std::span<const double> power, std::span<const double> capacities);

/// Logit-normal transform of a power matrix with boundary clipping.
struct TransformedSeries {
  Eigen::MatrixXd values;
  double epsilon = kDefaultEpsilon;
};

TransformedSeries transform_power(const Eigen::MatrixXd& power, double epsilon = kDefaultEpsilon);
Eigen::MatrixXd inverse_transform(const TransformedSeries& series);

}  // namespace stwind
