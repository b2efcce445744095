#include "stwind/inference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <omp.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "json.hpp"
#include "stwind/error.hpp"
#include "stwind/rng.hpp"

namespace stwind {

namespace {

double log_det(const Cholesky& llt) {
  return 2.0 * llt.matrixL().nestedExpression().diagonal().array().log().sum();
}

}  // namespace

double SparseGaussianPosterior::log_det_precision() const { return log_det(*cholesky); }

Eigen::MatrixXd SparseGaussianPosterior::covariance() const {
  const Index n = dimension();
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  return cholesky->solve(id);
}

Eigen::VectorXd SparseGaussianPosterior::marginal_variances() const {
  const Index n = dimension();
  Eigen::VectorXd out(n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    e[i] = 1.0;
    out[i] = cholesky->solve(e)[i];
    e[i] = 0.0;
  }
  return out;
}

Eigen::VectorXd SparseGaussianPosterior::draw(const Eigen::VectorXd& z) const {
  Eigen::VectorXd u = cholesky->matrixU().solve(z);
  return mean + cholesky->permutationPinv() * u;
}

std::string describe(const Hyperparameters& th, ModelKind kind) {
  std::ostringstream s;
  s.precision(6);
  s << to_string(kind) << " theta{sigma_e2=" << th.sigma_e2;
  if (kind != ModelKind::kST) s << ", sigma_nu2=" << th.sigma_nu2 << ", rho1=" << th.rho1;
  if (kind != ModelKind::kT) s << ", rho2=" << th.rho2 << ", sigma_w2=" << th.sigma_w2 << ", kappa=" << th.kappa;
  s << "}";
  return s.str();
}

ConditionedSystem condition_linear_gaussian(const SparseMatrix& q_prior, const SparseMatrix& a,
                                            const Eigen::VectorXd& y, double sigma_e2) {
  if (a.cols() != q_prior.rows() || a.rows() != y.size()) throw DimensionError("condition: shape mismatch");
  if (!(sigma_e2 > 0.0)) throw DomainError("condition: sigma_e2 must be positive");
  Cholesky prior(q_prior);
  if (prior.info() != Eigen::Success) throw ConditioningError("prior precision is not positive definite");
  const SparseMatrix at = a.transpose();
  SparseMatrix q_post = q_prior + SparseMatrix(at * a) / sigma_e2;
  auto chol = std::make_shared<Cholesky>(q_post);
  if (chol->info() != Eigen::Success) throw ConditioningError("posterior precision is not positive definite");
  const Eigen::VectorXd b = at * y / sigma_e2;
  ConditionedSystem out;
  out.posterior.mean = chol->solve(b);
  out.posterior.precision = q_post.triangularView<Eigen::Lower>();
  out.posterior.cholesky = chol;
  const double n = static_cast<double>(y.size());
  out.log_evidence = 0.5 * log_det(prior) - 0.5 * log_det(*chol) - 0.5 * n * std::log(2.0 * std::numbers::pi * sigma_e2) -
                     0.5 * (y.squaredNorm() / sigma_e2 - out.posterior.mean.dot(b));
  return out;
}

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

void pin_blas_threads() {
  if (openblas_set_num_threads) openblas_set_num_threads(1);
}

PosteriorEvaluator::PosteriorEvaluator(const LatentGaussianModel& model)
    : model_(&model), rhs_unit_(model.projector().transpose() * model.observations()),
      yty_(model.observations().squaredNorm()), fast_(std::make_unique<FastCholesky>()) {
  pin_blas_threads();
  fast_->cholmod().print = 0;
  q_ = model.posterior_terms().evaluate(model.posterior_coefficients(Hyperparameters{}), Execution::kSerial);
  fast_->analyzePattern(q_);
}

PosteriorEvaluator::~PosteriorEvaluator() = default;

Eigen::VectorXd PosteriorEvaluator::factorize(const Hyperparameters& theta) {
  const auto coeffs = model_->posterior_coefficients(theta);
  model_->posterior_terms().evaluate_into(coeffs, q_, Execution::kSerial);
  fast_->factorize(q_);
  if (fast_->info() != Eigen::Success)
    throw ConditioningError("posterior precision factorization failed at " + describe(theta, model_->kind()));
  Eigen::VectorXd m = fast_->solve(rhs_unit_ / theta.sigma_e2);
  if (!m.allFinite()) throw ConditioningError("non-finite posterior mean at " + describe(theta, model_->kind()));
  return m;
}

SparseGaussianPosterior PosteriorEvaluator::condition(const Hyperparameters& theta) {
  const auto coeffs = model_->posterior_coefficients(theta);
  SparseGaussianPosterior post;
  post.precision = model_->posterior_terms().evaluate(coeffs, Execution::kSerial);
  auto chol = std::make_shared<Cholesky>(post.precision);
  if (chol->info() != Eigen::Success)
    throw ConditioningError("posterior precision factorization failed at " + describe(theta, model_->kind()));
  post.mean = chol->solve(rhs_unit_ / theta.sigma_e2);
  post.cholesky = std::move(chol);
  return post;
}

double PosteriorEvaluator::log_evidence(const Hyperparameters& theta) {
  const Eigen::VectorXd m = factorize(theta);
  const double n = static_cast<double>(model_->n_observations());
  const double se = theta.sigma_e2;
  return 0.5 * model_->log_det_prior(theta) - 0.5 * fast_->logDeterminant() -
         0.5 * n * std::log(2.0 * std::numbers::pi * se) - 0.5 * (yty_ / se - m.dot(rhs_unit_) / se);
}

double PosteriorEvaluator::log_marginal_posterior(const Hyperparameters& theta) {
  return log_evidence(theta) + log_hyperprior(theta, model_->kind(), model_->prior_settings());
}

SparseGaussianPosterior condition(const LatentGaussianModel& model, const Hyperparameters& theta) {
  PosteriorEvaluator ev(model);
  return ev.condition(theta);
}

double log_marginal_posterior(const LatentGaussianModel& model, const Hyperparameters& theta) {
  PosteriorEvaluator ev(model);
  return ev.log_marginal_posterior(theta);
}

Hyperparameters initial_hyperparameters(const LatentGaussianModel& model) {
  const auto& y = model.observations();
  double v = 1.0;
  if (y.size() > 1) v = std::max((y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1), 1e-4);
  Hyperparameters th;
  th.sigma_e2 = 0.1 * v;
  th.rho1 = 0.8;
  th.rho2 = 0.5;
  const double share = model.kind() == ModelKind::kSTT ? 0.45 : 0.9;
  th.sigma_nu2 = share * v * (1.0 - th.rho1 * th.rho1);
  th.sigma_w2 = share * v;
  if (model.kind() != ModelKind::kT) {
    const auto& verts = model.domain()->mesh.vertices();
    double x0 = verts[0].x, x1 = x0, y0 = verts[0].y, y1 = y0;
    for (auto p : model.locations()) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    const double diam = std::max(std::hypot(x1 - x0, y1 - y0), 1e-6);
    th.kappa = kappa_from_range(diam / 3.0);
  }
  return th;
}

FitResult fit_map(const LatentGaussianModel& model, const Hyperparameters& theta_init, const FitOptions& options) {
  validate(theta_init, model.kind());
  PosteriorEvaluator ev(model);
  const ModelKind kind = model.kind();
  auto objective = [&](const Eigen::VectorXd& u) {
    try {
      return -ev.log_marginal_posterior(from_unconstrained(u, kind, theta_init));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  FitResult fit;
  fit.kind = kind;
  fit.theta_init = theta_init;
  fit.log_posterior_at_init = -objective(to_unconstrained(theta_init, kind));
  NelderMeadOptions nm;
  nm.max_iter = options.max_iter;
  nm.tolerance = options.tolerance;
  const auto res = nelder_mead(objective, to_unconstrained(theta_init, kind), nm);
  fit.theta_hat = from_unconstrained(res.x, kind, theta_init);
  fit.log_posterior_at_mode = -res.value;
  fit.iterations = res.iterations;
  fit.evaluations = res.evaluations;
  fit.converged = res.converged;
  return fit;
}

namespace {

nlohmann::json theta_json(const Hyperparameters& th, ModelKind kind) {
  nlohmann::json j;
  for (const auto& name : active_parameters(kind)) {
    if (name == "sigma_e2") j[name] = th.sigma_e2;
    else if (name == "sigma_nu2") j[name] = th.sigma_nu2;
    else if (name == "rho1") j[name] = th.rho1;
    else if (name == "rho2") j[name] = th.rho2;
    else if (name == "sigma_w2") j[name] = th.sigma_w2;
    else if (name == "kappa") j[name] = th.kappa;
  }
  if (kind != ModelKind::kT) j["range_km"] = th.range();
  return j;
}

Hyperparameters theta_from_json(const nlohmann::json& j, ModelKind kind) {
  Hyperparameters th;
  for (const auto& name : active_parameters(kind)) {
    if (!j.contains(name)) throw ParseError("theta is missing '" + name + "' for model " + to_string(kind));
    const double v = j.at(name).get<double>();
    if (name == "sigma_e2") th.sigma_e2 = v;
    else if (name == "sigma_nu2") th.sigma_nu2 = v;
    else if (name == "rho1") th.rho1 = v;
    else if (name == "rho2") th.rho2 = v;
    else if (name == "sigma_w2") th.sigma_w2 = v;
    else if (name == "kappa") th.kappa = v;
  }
  validate(th, kind);
  return th;
}

}  // namespace

std::string fit_result_to_json(const FitResult& fit) {
  nlohmann::json j;
  j["model"] = to_string(fit.kind);
  j["theta"] = theta_json(fit.theta_hat, fit.kind);
  j["theta_init"] = theta_json(fit.theta_init, fit.kind);
  j["log_posterior"] = fit.log_posterior_at_mode;
  j["log_posterior_init"] = fit.log_posterior_at_init;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["seed"] = fit.seed;
  j["estimation"] = "MAP hyperparameters (no integration over hyperparameter uncertainty)";
  return j.dump(2) + "\n";
}

FitResult fit_result_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    FitResult fit;
    fit.kind = parse_model_kind(j.at("model").get<std::string>());
    fit.theta_hat = theta_from_json(j.at("theta"), fit.kind);
    fit.theta_init = j.contains("theta_init") ? theta_from_json(j.at("theta_init"), fit.kind) : fit.theta_hat;
    fit.log_posterior_at_mode = j.value("log_posterior", 0.0);
    fit.log_posterior_at_init = j.value("log_posterior_init", 0.0);
    fit.converged = j.value("converged", false);
    fit.iterations = j.value("iterations", 0);
    fit.evaluations = j.value("evaluations", 0);
    fit.seed = j.value("seed", std::uint64_t{0});
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fit result JSON: ") + e.what());
  }
}

RowMatrix predictive_draws(const LatentGaussianModel& model, const SparseGaussianPosterior& posterior,
                           const Hyperparameters& theta, Index n_samples, std::uint64_t seed, Execution exec) {
  const SparseMatrix& ap = model.forecast_projector();
  const Index n = posterior.dimension(), m = ap.rows();
  const double noise_sd = std::sqrt(theta.sigma_e2);
  RowMatrix out(m, n_samples);
  auto one = [&](Index s, Eigen::VectorXd& z) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    std::normal_distribution<double> normal;
    for (Index i = 0; i < n; ++i) z[i] = normal(rng);
    const Eigen::VectorXd eta = ap * posterior.draw(z);
    for (Index r = 0; r < m; ++r) out(r, s) = eta[r] + noise_sd * normal(rng);
  };
  if (exec == Execution::kSerial) {
    Eigen::VectorXd z(n);
    for (Index s = 0; s < n_samples; ++s) one(s, z);
    return out;
  }
#pragma omp parallel
  {
    Eigen::VectorXd z(n);
#pragma omp for schedule(dynamic, 8)
    for (Index s = 0; s < n_samples; ++s) one(s, z);
  }
  return out;
}

SampleCube predictive_samples(const LatentGaussianModel& model, const Hyperparameters& theta, Index n_samples,
                              std::uint64_t seed, Execution exec) {
  if (n_samples < 2) throw ArgumentError("predictive sampling needs n_samples >= 2");
  if (model.horizon() < 1) throw ArgumentError("model was assembled without a forecast horizon");
  const auto post = condition(model, theta);
  SampleCube cube;
  cube.values = predictive_draws(model, post, theta, n_samples, seed, exec);
  cube.values = cube.values.unaryExpr([](double v) { return inv_logit(v); });
  cube.n_targets = model.n_targets();
  cube.horizon = model.horizon();
  cube.kind = model.kind();
  cube.theta = theta;
  return cube;
}

namespace {

Eigen::MatrixXd ar1_covariance(Index n, double rho, double innovation_var) {
  Eigen::MatrixXd c(n, n);
  const double marginal = innovation_var / (1.0 - rho * rho);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) c(i, j) = marginal * std::pow(rho, static_cast<double>(std::abs(i - j)));
  return c;
}

}  // namespace

DensePosterior dense_oracle(const LatentGaussianModel& model, const Hyperparameters& theta) {
  const Index dim = model.dimension();
  if (dim > kDenseOracleLimit)
    throw DimensionError("dense oracle refuses latent dimension " + std::to_string(dim) + " > " +
                         std::to_string(kDenseOracleLimit));
  validate(theta, model.kind());
  const auto& lay = model.layout();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(dim, dim);
  sigma.topLeftCorner(lay.n_intercepts, lay.n_intercepts).diagonal().setConstant(model.prior_settings().intercept_variance);
  if (lay.n_chains > 0) {
    const Eigen::MatrixXd c = ar1_covariance(lay.chain_length, theta.rho1, theta.sigma_nu2);
    for (Index k = 0; k < lay.n_chains; ++k) sigma.block(lay.ar_index(k, 0), lay.ar_index(k, 0), c.rows(), c.cols()) = c;
  }
  if (lay.n_knots > 0) {
    const SparseMatrix qs =
        spatial_precision(model.domain()->fem, theta.kappa, tau_from_sigma(theta.sigma_w2, theta.kappa));
    const Eigen::MatrixXd qs_dense(qs);
    const Eigen::MatrixXd cov_s = qs_dense.inverse();
    const Eigen::MatrixXd cov_t = ar1_covariance(lay.n_knots, theta.rho2, 1.0);
    const Index f = lay.n_knots * lay.n_vertices;
    sigma.block(lay.field_offset(), lay.field_offset(), f, f) = Eigen::kroneckerProduct(cov_t, cov_s);
  }
  const Eigen::MatrixXd a(model.projector());
  const Eigen::VectorXd& y = model.observations();
  DensePosterior out;
  if (a.rows() == 0) {
    out.mean = Eigen::VectorXd::Zero(dim);
    out.covariance = sigma;
    return out;
  }
  Eigen::MatrixXd s = a * sigma * a.transpose();
  s.diagonal().array() += theta.sigma_e2;
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw ConditioningError("dense marginal covariance is not positive definite");
  const Eigen::MatrixXd sat = sigma * a.transpose();
  out.mean = sat * llt.solve(y);
  out.covariance = sigma - sat * llt.solve(sat.transpose());
  const Eigen::MatrixXd l = llt.matrixL();
  const double n = static_cast<double>(y.size());
  out.log_evidence = -0.5 * n * std::log(2.0 * std::numbers::pi) - l.diagonal().array().log().sum() -
                     0.5 * y.dot(llt.solve(y));
  return out;
}

}  // namespace stwind
