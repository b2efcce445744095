#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "stwind/error.hpp"
#include "stwind/inference.hpp"
#include "stwind/rng.hpp"

using namespace stwind;

namespace {

std::shared_ptr<const SpatialDomain> small_domain() {
  return std::make_shared<SpatialDomain>(regular_grid_mesh(0, 40, 0, 10, 5, 2));
}

ModelInput random_input(Index farms, Index steps, Rng& rng) {
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> ux(0.5, 39.5), uy(0.5, 9.5);
  ModelInput in;
  for (Index j = 0; j < farms; ++j) in.locations.push_back({ux(rng), uy(rng)});
  in.y.resize(farms, steps);
  for (Index i = 0; i < in.y.size(); ++i) in.y.data()[i] = -0.5 + n(rng);
  return in;
}

Hyperparameters random_theta(Rng& rng) {
  std::uniform_real_distribution<double> lv(std::log(0.05), std::log(2.0)), r(-0.9, 0.9), range(5.0, 60.0);
  return {.sigma_e2 = std::exp(lv(rng)), .sigma_nu2 = std::exp(lv(rng)), .rho1 = r(rng), .rho2 = r(rng),
          .sigma_w2 = std::exp(lv(rng)), .kappa = kappa_from_range(range(rng))};
}

double log_normal_pdf(double x, double var) { return -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * x * x / var; }

Eigen::VectorXd predictive_variance(const LatentGaussianModel& m, const Hyperparameters& th) {
  const auto post = condition(m, th);
  const Eigen::MatrixXd ap(m.forecast_projector());
  return (ap * post.covariance() * ap.transpose()).diagonal().array() + th.sigma_e2;
}

}  // namespace

TEST(Oracle, SparseMatchesDenseAcrossKinds) {
  Rng rng(2024);
  const auto dom = small_domain();
  for (auto kind : {ModelKind::kT, ModelKind::kST, ModelKind::kSTT}) {
    for (int rep = 0; rep < 20; ++rep) {
      const Index farms = kind == ModelKind::kST ? 4 : 2;
      const auto m = assemble(kind, random_input(farms, kind == ModelKind::kT ? 30 : 25, rng), dom, {.horizon = 2});
      ASSERT_LE(m.dimension(), kDenseOracleLimit);
      const auto th = random_theta(rng);
      const auto dense = dense_oracle(m, th);
      PosteriorEvaluator ev(m);
      const auto post = ev.condition(th);
      const double scale = 1.0 + dense.mean.cwiseAbs().maxCoeff();
      EXPECT_LE((post.mean - dense.mean).cwiseAbs().maxCoeff(), 1e-8 * scale) << to_string(kind);
      EXPECT_LE((post.marginal_variances() - dense.covariance.diagonal()).cwiseAbs().maxCoeff(),
                1e-8 * (1.0 + dense.covariance.diagonal().maxCoeff()));
      EXPECT_NEAR(ev.log_evidence(th), dense.log_evidence, 1e-8 * (1.0 + std::abs(dense.log_evidence)));
      EXPECT_NEAR(ev.log_marginal_posterior(th) - log_hyperprior(th, kind), dense.log_evidence,
                  1e-8 * (1.0 + std::abs(dense.log_evidence)));
    }
  }
}

TEST(Oracle, RefusesLargeModels) {
  Rng rng(1);
  const auto m = assemble(ModelKind::kT, random_input(3, 80, rng), nullptr);
  EXPECT_THROW(dense_oracle(m, Hyperparameters{}), DimensionError);
}

TEST(Conditioning, OneDimensionalConjugate) {
  SparseMatrix q(1, 1), a(1, 1);
  q.insert(0, 0) = 1.0;
  a.insert(0, 0) = 1.0;
  const auto r = condition_linear_gaussian(q, a, Eigen::VectorXd::Constant(1, 2.0), 1.0);
  EXPECT_NEAR(r.posterior.mean[0], 1.0, 1e-14);
  EXPECT_NEAR(r.posterior.marginal_variances()[0], 0.5, 1e-14);
  EXPECT_NEAR(r.log_evidence, log_normal_pdf(2.0, 2.0), 1e-13);
}

TEST(Conditioning, NoDataOrHugeNoiseGivesPrior) {
  Eigen::MatrixXd qd(3, 3);
  qd << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  const SparseMatrix q = qd.sparseView();
  {
    const SparseMatrix a(0, 3);
    const auto r = condition_linear_gaussian(q, a, Eigen::VectorXd(0), 1.0);
    EXPECT_TRUE(r.posterior.mean.isZero());
    EXPECT_TRUE(r.posterior.covariance().isApprox(qd.inverse(), 1e-13));
    EXPECT_NEAR(r.log_evidence, 0.0, 1e-13);
  }
  {
    const SparseMatrix id = Eigen::MatrixXd::Identity(3, 3).sparseView();
    const SparseMatrix a(0, 3);
    EXPECT_TRUE(condition_linear_gaussian(id, a, Eigen::VectorXd(0), 1.0).posterior.covariance().isIdentity(1e-14));
  }
  {
    const SparseMatrix a = Eigen::MatrixXd::Identity(3, 3).sparseView();
    const auto r = condition_linear_gaussian(q, a, Eigen::Vector3d(1, 5, -3), 1e12);
    EXPECT_LT(r.posterior.mean.cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(r.posterior.covariance().isApprox(qd.inverse(), 1e-10));
  }
}

TEST(Conditioning, DuplicatedRowIsReproducible) {
  SparseMatrix q(2, 2), a1(1, 2), a2(2, 2);
  q.insert(0, 0) = 1.0;
  q.insert(1, 1) = 2.0;
  a1.insert(0, 0) = 1.0;
  a1.insert(0, 1) = 1.0;
  a2.insert(0, 0) = 1.0;
  a2.insert(0, 1) = 1.0;
  a2.insert(1, 0) = 1.0;
  a2.insert(1, 1) = 1.0;
  const double e1 = condition_linear_gaussian(q, a1, Eigen::VectorXd::Constant(1, 0.7), 0.3).log_evidence;
  const double e2 = condition_linear_gaussian(q, a2, Eigen::VectorXd::Constant(2, 0.7), 0.3).log_evidence;
  EXPECT_EQ(e2, condition_linear_gaussian(q, a2, Eigen::VectorXd::Constant(2, 0.7), 0.3).log_evidence);
  EXPECT_NE(e1, e2);
  // y = (s + e1, s + e2), s ~ N(0, 1.5): covariance 1.5 + 0.3 I
  Eigen::Matrix2d cov;
  cov << 1.8, 1.5, 1.5, 1.8;
  const Eigen::Vector2d y(0.7, 0.7);
  const double dense = -std::log(2 * std::numbers::pi) - 0.5 * std::log(cov.determinant()) - 0.5 * y.dot(cov.inverse() * y);
  EXPECT_NEAR(e2, dense, 1e-13);
}

TEST(Nesting, VanishingFieldOrChainsRecoverSmallerModels) {
  Rng rng(7);
  const auto dom = small_domain();
  const auto in = random_input(5, 20, rng);
  auto th = random_theta(rng);
  const AssemblyOptions shared{.horizon = 4, .intercept = InterceptMode::kShared};
  const auto stt = assemble(ModelKind::kSTT, in, dom, shared);
  const auto t = assemble(ModelKind::kT, in, nullptr, shared);
  const auto st = assemble(ModelKind::kST, in, dom, shared);
  auto no_field = th;
  no_field.sigma_w2 = 1e-10;
  auto no_chain = th;
  no_chain.sigma_nu2 = 1e-10;
  const Eigen::VectorXd m_stt_a = stt.forecast_projector() * condition(stt, no_field).mean;
  const Eigen::VectorXd m_t = t.forecast_projector() * condition(t, th).mean;
  EXPECT_LT((m_stt_a - m_t).cwiseAbs().maxCoeff(), 1e-4);
  const Eigen::VectorXd m_stt_b = stt.forecast_projector() * condition(stt, no_chain).mean;
  const Eigen::VectorXd m_st = st.forecast_projector() * condition(st, th).mean;
  EXPECT_LT((m_stt_b - m_st).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Predictive, WhiteNoiseChainsGiveConstantVariance) {
  Rng rng(3);
  const auto m = assemble(ModelKind::kT, random_input(2, 12, rng), nullptr, {.horizon = 6});
  Hyperparameters th{.sigma_e2 = 0.2, .sigma_nu2 = 0.5, .rho1 = 0.0};
  const auto v = predictive_variance(m, th);
  const auto post = condition(m, th);
  const double var_b = post.covariance()(0, 0);
  for (Index h = 0; h < 6; ++h) EXPECT_NEAR(v[h], var_b + 0.5 + 0.2, 1e-10);
}

TEST(Predictive, ArVarianceGrowsToStationary) {
  Rng rng(4);
  const auto m = assemble(ModelKind::kT, random_input(1, 40, rng), nullptr, {.horizon = 60});
  Hyperparameters th{.sigma_e2 = 0.05, .sigma_nu2 = 0.1, .rho1 = 0.8};
  const auto v = predictive_variance(m, th);
  const auto post = condition(m, th);
  for (Index h = 1; h < 60; ++h) EXPECT_GE(v[h], v[h - 1] - 1e-12);
  const double limit = post.covariance()(0, 0) + 0.1 / (1 - 0.64) + 0.05;
  EXPECT_NEAR(v[59] / limit, 1.0, 0.01);
  EXPECT_LT(v[0], 0.9 * limit);
}

TEST(Predictive, ColocatedFarmsMoveTogether) {
  ModelInput in;
  // one observed farm, two co-located forecast-only targets
  in.locations = {{5, 2}, {20, 5}, {20, 5}};
  Rng rng(5);
  in.y = random_input(1, 24, rng).y;
  const auto m = assemble(ModelKind::kST, in, small_domain(), {.horizon = 12});
  Hyperparameters th{.sigma_e2 = 0.001, .rho2 = 0.8, .sigma_w2 = 1.0, .kappa = kappa_from_range(30)};
  const auto draws = predictive_draws(m, condition(m, th), th, 4000, 11);
  const Eigen::VectorXd x = draws.row(1 * 12 + 11).transpose(), y = draws.row(2 * 12 + 11).transpose();
  const double cx = (x.array() - x.mean()).matrix().norm(), cy = (y.array() - y.mean()).matrix().norm();
  const double corr = (x.array() - x.mean()).matrix().dot((y.array() - y.mean()).matrix()) / (cx * cy);
  EXPECT_GT(corr, 0.99);
}

TEST(Sampling, MomentsMatchPosterior) {
  Rng rng(6);
  const auto m = assemble(ModelKind::kT, random_input(1, 4, rng), nullptr);
  ASSERT_EQ(m.dimension(), 5);
  const Hyperparameters th{.sigma_e2 = 0.3, .sigma_nu2 = 0.4, .rho1 = 0.6};
  const auto post = condition(m, th);
  const Eigen::MatrixXd cov = post.covariance();
  const Index n = 100000;
  RowMatrix z(n, 5);
  kernels::standard_normal_rows(17, z, Execution::kSerial);
  Eigen::MatrixXd x(n, 5);
  for (Index s = 0; s < n; ++s) x.row(s) = post.draw(z.row(s).transpose()).transpose();
  const Eigen::VectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd emp = c.transpose() * c / static_cast<double>(n - 1);
  for (Index i = 0; i < 5; ++i) {
    EXPECT_LT(std::abs(mean[i] - post.mean[i]), 4.0 * std::sqrt(cov(i, i) / n));
    for (Index j = 0; j < 5; ++j)
      EXPECT_LT(std::abs(emp(i, j) - cov(i, j)), 4.0 * std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n));
  }
}

TEST(Sampling, CubeIsDeterministicAndValidated) {
  Rng rng(8);
  const auto m = assemble(ModelKind::kSTT, random_input(3, 24, rng), small_domain(), {.horizon = 5});
  const auto th = random_theta(rng);
  const auto a = predictive_samples(m, th, 50, 99, Execution::kSerial);
  const auto b = predictive_samples(m, th, 50, 99, Execution::kParallel);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values.rows(), 3 * 5);
  EXPECT_TRUE((a.values.array() > 0.0).all() && (a.values.array() < 1.0).all());
  EXPECT_NE(predictive_samples(m, th, 50, 100).values, a.values);
  EXPECT_THROW(predictive_samples(m, th, 1, 99), ArgumentError);
}

TEST(Fit, ImprovesAndIsDeterministic) {
  Rng rng(9);
  const auto m = assemble(ModelKind::kSTT, random_input(4, 36, rng), small_domain());
  const auto init = initial_hyperparameters(m);
  const auto a = fit_map(m, init);
  const auto b = fit_map(m, init);
  EXPECT_GE(a.log_posterior_at_mode, a.log_posterior_at_init);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.evaluations, b.evaluations);
  EXPECT_NEAR(a.log_posterior_at_mode, log_marginal_posterior(m, a.theta_hat), 1e-9);
  const auto c = fit_map(m, init, {.max_iter = 1});
  EXPECT_FALSE(c.converged);
}

TEST(Fit, JsonRoundTrip) {
  FitResult f;
  f.kind = ModelKind::kSTT;
  f.theta_hat = {.sigma_e2 = 0.011, .sigma_nu2 = 0.09, .rho1 = 0.91, .rho2 = 0.66, .sigma_w2 = 1.2, .kappa = 0.047};
  f.theta_init = Hyperparameters{};
  f.log_posterior_at_mode = -123.456;
  f.iterations = 77;
  f.evaluations = 140;
  f.converged = true;
  f.seed = 42;
  const auto g = fit_result_from_json(fit_result_to_json(f));
  EXPECT_EQ(g.kind, f.kind);
  EXPECT_EQ(g.theta_hat, f.theta_hat);
  EXPECT_EQ(g.iterations, 77);
  EXPECT_EQ(g.converged, true);
  EXPECT_EQ(g.seed, 42u);
  EXPECT_NE(fit_result_to_json(f).find("range_km"), std::string::npos);
}

TEST(Fit, ModelTRecoversRho) {
  // 20 replicates of 20 farms x 192 steps from Model T.
  const double rho = 0.9, s2 = 0.1, se2 = 0.01;
  std::vector<double> est;
  for (int rep = 0; rep < 20; ++rep) {
    Rng rng(derive_seed(77, {static_cast<std::uint64_t>(rep)}));
    std::normal_distribution<double> n;
    ModelInput in;
    in.y.resize(20, 192);
    for (Index j = 0; j < 20; ++j) {
      in.locations.push_back({static_cast<double>(j), 0.0});
      const double b = -1.0 + 0.3 * n(rng);
      double x = std::sqrt(s2 / (1 - rho * rho)) * n(rng);
      for (Index t = 0; t < 192; ++t) {
        if (t > 0) x = rho * x + std::sqrt(s2) * n(rng);
        in.y(j, t) = b + x + std::sqrt(se2) * n(rng);
      }
    }
    const auto m = assemble(ModelKind::kT, in, nullptr);
    est.push_back(fit_map(m, initial_hyperparameters(m)).theta_hat.rho1);
  }
  std::nth_element(est.begin(), est.begin() + 10, est.end());
  EXPECT_NEAR(est[10], rho, 0.1);
}
