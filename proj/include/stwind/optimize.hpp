#pragma once

#include <functional>

#include <Eigen/Dense>

namespace stwind {

struct NelderMeadOptions {
  int max_iter = 500;
  double tolerance = 1e-6;   // relative spread of objective values over the simplex
  double initial_step = 0.5;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f with the Nelder-Mead simplex (standard coefficients 1, 2, 0.5,
/// 0.5). Non-finite objective values are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             const NelderMeadOptions& options = {});

}  // namespace stwind
