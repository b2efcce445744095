#include "stwind/transform.hpp"

#include <algorithm>
#include <cmath>

#include "stwind/error.hpp"

namespace stwind {

double clip_bounds(double x, double epsilon) {
  return std::min(std::max(x, epsilon), 1.0 - epsilon);
}

double logit(double x) {
  if (!(x > 0.0 && x < 1.0)) throw DomainError("logit requires 0 < x < 1");
  return std::log(x / (1.0 - x));
}

double inv_logit(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

double aggregate(std::span<const double> power, std::span<const double> capacities) {
  if (power.size() != capacities.size() || power.empty())
    throw DimensionError("aggregate needs equally sized, non-empty power and capacity vectors");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < power.size(); ++j) {
    num += capacities[j] * power[j];
    den += capacities[j];
  }
  return num / den;
}

TransformedSeries transform_power(const Eigen::MatrixXd& power, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw DomainError("epsilon must lie in (0, 0.5)");
  return {power.unaryExpr([epsilon](double x) { return logit(clip_bounds(x, epsilon)); }), epsilon};
}

Eigen::MatrixXd inverse_transform(const TransformedSeries& series) {
  return series.values.unaryExpr([](double y) { return inv_logit(y); });
}

}  // namespace stwind
