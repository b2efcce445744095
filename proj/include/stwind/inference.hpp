#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>
#include <Eigen/CholmodSupport>
#include <Eigen/SparseCholesky>

#include "stwind/kernels.hpp"
#include "stwind/model.hpp"
#include "stwind/optimize.hpp"

namespace stwind {

using Cholesky = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
// Supernodal factorization for the many evaluations of a fit.
using FastCholesky = Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower>;

/// Gaussian latent posterior N(mean, precision^-1) with its factorization.
struct SparseGaussianPosterior {
  Eigen::VectorXd mean;
  SparseMatrix precision;  // lower triangle
  std::shared_ptr<const Cholesky> cholesky;

  Index dimension() const { return mean.size(); }
  /// 2 sum log diag(L).
  double log_det_precision() const;
  /// diag(precision^-1) by one solve per entry; meant for small checks.
  Eigen::VectorXd marginal_variances() const;
  Eigen::MatrixXd covariance() const;
  /// mean + L^-T z (in the original ordering) for a standard normal z.
  Eigen::VectorXd draw(const Eigen::VectorXd& z) const;
};

/// Generic y = A x + e conditioning with a full symmetric prior precision;
/// log|Q_prior| from its own factorization.
struct ConditionedSystem {
  SparseGaussianPosterior posterior;
  double log_evidence = 0.0;
};
ConditionedSystem condition_linear_gaussian(const SparseMatrix& q_prior, const SparseMatrix& a,
                                            const Eigen::VectorXd& y, double sigma_e2);

/// Conditions one model for many theta values, reusing the fill-reducing
/// ordering and symbolic analysis.
class PosteriorEvaluator {
 public:
  explicit PosteriorEvaluator(const LatentGaussianModel& model);
  ~PosteriorEvaluator();
  PosteriorEvaluator(const PosteriorEvaluator&) = delete;
  PosteriorEvaluator& operator=(const PosteriorEvaluator&) = delete;

  const LatentGaussianModel& model() const { return *model_; }

  SparseGaussianPosterior condition(const Hyperparameters& theta);
  /// log p(y | theta).
  double log_evidence(const Hyperparameters& theta);
  /// log p(y | theta) + log p(theta).
  double log_marginal_posterior(const Hyperparameters& theta);

 private:
  // Factorizes Q_post(theta) into fast_ and returns the mean.
  Eigen::VectorXd factorize(const Hyperparameters& theta);

  const LatentGaussianModel* model_;
  Eigen::VectorXd rhs_unit_;  // A^T y
  double yty_ = 0.0;
  SparseMatrix q_;
  std::unique_ptr<FastCholesky> fast_;
};

/// Keeps BLAS single-threaded so factorizations stay reproducible when fits
/// run side by side. Idempotent.
void pin_blas_threads();

SparseGaussianPosterior condition(const LatentGaussianModel& model, const Hyperparameters& theta);
double log_marginal_posterior(const LatentGaussianModel& model, const Hyperparameters& theta);

struct FitOptions {
  int max_iter = 500;
  double tolerance = 1e-6;
  friend bool operator==(const FitOptions&, const FitOptions&) = default;
};

struct FitResult {
  ModelKind kind = ModelKind::kT;
  Hyperparameters theta_hat;
  Hyperparameters theta_init;
  double log_posterior_at_mode = 0.0;
  double log_posterior_at_init = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
};

/// Starting point from the spread of the transformed data and the size of the
/// domain.
Hyperparameters initial_hyperparameters(const LatentGaussianModel& model);

/// MAP estimate over the unconstrained parameterization by Nelder-Mead.
FitResult fit_map(const LatentGaussianModel& model, const Hyperparameters& theta_init, const FitOptions& options = {});

std::string describe(const Hyperparameters& theta, ModelKind kind);

std::string fit_result_to_json(const FitResult& fit);
FitResult fit_result_from_json(const std::string& text);

/// n_samples joint draws at every (target, lead time), power scale.
/// values(target * H + h - 1, s).
struct SampleCube {
  RowMatrix values;
  Index n_targets = 0;
  Index horizon = 0;
  ModelKind kind = ModelKind::kT;
  Hyperparameters theta;

  Index n_samples() const { return values.cols(); }
  double at(Index sample, Index target, Index h) const { return values(target * horizon + h - 1, sample); }
};

/// Transformed-scale draws eta = A_pred x + e, laid out like SampleCube::values.
RowMatrix predictive_draws(const LatentGaussianModel& model, const SparseGaussianPosterior& posterior,
                           const Hyperparameters& theta, Index n_samples, std::uint64_t seed,
                           Execution exec = Execution::kParallel);

/// Conditions, draws and maps through inv_logit. Throws ArgumentError if n_samples < 2.
SampleCube predictive_samples(const LatentGaussianModel& model, const Hyperparameters& theta, Index n_samples,
                              std::uint64_t seed, Execution exec = Execution::kParallel);

/// Dense posterior for equivalence tests. Builds the prior covariance directly
/// (not by inverting the sparse precision) and conditions by kriging.
struct DensePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double log_evidence = 0.0;
};

inline constexpr Index kDenseOracleLimit = 200;

/// Throws DimensionError above kDenseOracleLimit latent dimensions.
DensePosterior dense_oracle(const LatentGaussianModel& model, const Hyperparameters& theta);

}  // namespace stwind
