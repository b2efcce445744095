#include "stwind/model.hpp"

#include <cmath>
#include <numbers>

#include <unsupported/Eigen/KroneckerProduct>

#include "stwind/error.hpp"

namespace stwind {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kT: return "T";
    case ModelKind::kST: return "S-T";
    case ModelKind::kSTT: return "ST+T";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "T") return ModelKind::kT;
  if (text == "S-T") return ModelKind::kST;
  if (text == "ST+T") return ModelKind::kSTT;
  throw ArgumentError("unknown model kind '" + std::string(text) + "' (expected T, S-T or ST+T)");
}

namespace {

bool uses_ar(ModelKind k) { return k != ModelKind::kST; }
bool uses_field(ModelKind k) { return k != ModelKind::kT; }

}  // namespace

void validate(const Hyperparameters& th, ModelKind kind) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive and finite");
  };
  auto correlation = [](double r, const char* name) {
    if (!(std::abs(r) < 1.0)) throw DomainError(std::string(name) + " must satisfy |rho| < 1");
  };
  positive(th.sigma_e2, "sigma_e2");
  if (uses_ar(kind)) {
    positive(th.sigma_nu2, "sigma_nu2");
    correlation(th.rho1, "rho1");
  }
  if (uses_field(kind)) {
    positive(th.sigma_w2, "sigma_w2");
    positive(th.kappa, "kappa");
    correlation(th.rho2, "rho2");
  }
}

std::vector<std::string> active_parameters(ModelKind kind) {
  switch (kind) {
    case ModelKind::kT: return {"sigma_e2", "sigma_nu2", "rho1"};
    case ModelKind::kST: return {"sigma_e2", "rho2", "sigma_w2", "kappa"};
    case ModelKind::kSTT: return {"sigma_e2", "sigma_nu2", "rho1", "rho2", "sigma_w2", "kappa"};
  }
  return {};
}

double correlation_to_internal(double rho) { return std::log((1.0 + rho) / (1.0 - rho)); }
double correlation_from_internal(double z) { return std::tanh(0.5 * z); }

Eigen::VectorXd to_unconstrained(const Hyperparameters& th, ModelKind kind) {
  const auto names = active_parameters(kind);
  Eigen::VectorXd u(static_cast<Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& n = names[i];
    const auto k = static_cast<Index>(i);
    if (n == "sigma_e2") u[k] = std::log(th.sigma_e2);
    else if (n == "sigma_nu2") u[k] = std::log(th.sigma_nu2);
    else if (n == "rho1") u[k] = correlation_to_internal(th.rho1);
    else if (n == "rho2") u[k] = correlation_to_internal(th.rho2);
    else if (n == "sigma_w2") u[k] = std::log(th.sigma_w2);
    else if (n == "kappa") u[k] = std::log(th.kappa);
  }
  return u;
}

Hyperparameters from_unconstrained(const Eigen::VectorXd& u, ModelKind kind, const Hyperparameters& base) {
  const auto names = active_parameters(kind);
  if (u.size() != static_cast<Index>(names.size())) throw DimensionError("unconstrained vector has wrong length");
  Hyperparameters th = base;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& n = names[i];
    const double v = u[static_cast<Index>(i)];
    if (n == "sigma_e2") th.sigma_e2 = std::exp(v);
    else if (n == "sigma_nu2") th.sigma_nu2 = std::exp(v);
    else if (n == "rho1") th.rho1 = correlation_from_internal(v);
    else if (n == "rho2") th.rho2 = correlation_from_internal(v);
    else if (n == "sigma_w2") th.sigma_w2 = std::exp(v);
    else if (n == "kappa") th.kappa = std::exp(v);
  }
  return th;
}

double log_hyperprior(const Hyperparameters& th, ModelKind kind, const PriorSettings& prior) {
  validate(th, kind);
  const double a = prior.precision_shape, b = prior.precision_rate;
  // log-Gamma(a, b): density of log(x) for x ~ Gamma(a, rate b)
  auto log_gamma_on_log = [&](double log_x) {
    return a * std::log(b) - std::lgamma(a) + a * log_x - b * std::exp(log_x);
  };
  auto gaussian = [&](double z) {
    const double s = prior.correlation_sd;
    return -0.5 * std::log(2.0 * std::numbers::pi * s * s) - 0.5 * z * z / (s * s);
  };
  double lp = log_gamma_on_log(-std::log(th.sigma_e2));
  if (uses_ar(kind)) {
    lp += log_gamma_on_log(-std::log(th.sigma_nu2));
    lp += gaussian(correlation_to_internal(th.rho1));
  }
  if (uses_field(kind)) {
    lp += log_gamma_on_log(-std::log(th.sigma_w2));
    lp += log_gamma_on_log(2.0 * std::log(th.kappa));
    lp += gaussian(correlation_to_internal(th.rho2));
  }
  return lp;
}

SpatialDomain::SpatialDomain(Mesh m) : mesh(std::move(m)), fem(fem_matrices(mesh)) {}

ModelInput model_input(const Window& window, double epsilon) {
  return {window.train.locations(), transform_power(window.train.power(), epsilon).values};
}

namespace {

enum TermTag : int {
  kIntercept = 0,
  kArIdentity = 1,
  kArInterior = 2,
  kArOffDiagonal = 3,
  kFieldFirst = 10,  // 10 + 3 * time_part + space_part
  kData = 99,
};

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_block(Triplets& trip, const SparseMatrix& block, Index offset) {
  for (Index k = 0; k < block.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(block, k); it; ++it)
      trip.emplace_back(offset + it.row(), offset + it.col(), it.value());
}

SparseMatrix from_triplets(Index n, const Triplets& trip) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

// The three structural parts of a stationary AR(1) precision: identity,
// interior indicator (ends 0; -1 for a single point) and first off-diagonals.
std::array<SparseMatrix, 3> ar1_parts(Index n) {
  Triplets id, in, off;
  for (Index t = 0; t < n; ++t) {
    id.emplace_back(t, t, 1.0);
    if (n == 1) in.emplace_back(t, t, -1.0);
    else if (t > 0 && t + 1 < n) in.emplace_back(t, t, 1.0);
    if (t + 1 < n) {
      off.emplace_back(t, t + 1, 1.0);
      off.emplace_back(t + 1, t, 1.0);
    }
  }
  return {from_triplets(n, id), from_triplets(n, in), from_triplets(n, off)};
}

}  // namespace

LatentGaussianModel assemble(ModelKind kind, const ModelInput& input, std::shared_ptr<const SpatialDomain> domain,
                             const AssemblyOptions& options) {
  const Index n_obs_farms = input.y.rows();
  const Index n_targets = static_cast<Index>(input.locations.size());
  const Index L = input.y.cols();
  if (L < 2) throw ArgumentError("model assembly needs at least 2 training steps");
  if (n_obs_farms > n_targets) throw DimensionError("more data rows than locations");
  if (options.horizon < 0 || options.knot_spacing < 1) throw ArgumentError("invalid horizon or knot spacing");
  if (!input.y.allFinite()) throw DomainError("training data must be finite");
  if (uses_field(kind) && !domain) throw ArgumentError("model " + to_string(kind) + " needs a spatial domain");

  LatentGaussianModel m;
  m.kind_ = kind;
  m.prior_ = options.prior;
  m.training_length_ = L;
  m.horizon_ = options.horizon;
  m.locations_ = input.locations;
  m.domain_ = uses_field(kind) ? std::move(domain) : nullptr;
  m.intercept_mode_ = options.intercept.value_or(kind == ModelKind::kT ? InterceptMode::kPerFarm : InterceptMode::kShared);

  const Index n_steps = L + options.horizon;
  auto& lay = m.layout_;
  lay.kind = kind;
  lay.n_intercepts = m.intercept_mode_ == InterceptMode::kPerFarm ? n_targets : 1;
  if (uses_ar(kind)) {
    lay.n_chains = n_targets;
    lay.chain_length = n_steps;
  }
  std::vector<std::vector<BasisWeight>> sw;
  if (uses_field(kind)) {
    m.knots_ = knots_covering(n_steps, options.knot_spacing);
    lay.n_vertices = m.domain_->mesh.n_vertices();
    lay.n_knots = m.knots_.n_knots;
    sw = spatial_weights(m.domain_->mesh, input.locations);
  }
  const Index dim = lay.dimension();

  // Projector rows for (farm, step).
  auto add_row = [&](Triplets& trip, Index row, Index farm, Index t) {
    trip.emplace_back(row, m.intercept_mode_ == InterceptMode::kPerFarm ? farm : 0, 1.0);
    if (uses_ar(kind)) trip.emplace_back(row, lay.ar_index(farm, t), 1.0);
    if (uses_field(kind))
      for (const auto& w : temporal_weights(m.knots_, static_cast<double>(t)))
        for (const auto& s : sw[static_cast<std::size_t>(farm)])
          trip.emplace_back(row, lay.field_index(w.knot, s.vertex), w.weight * s.weight);
  };
  Triplets a_trip;
  m.y_.resize(n_obs_farms * L);
  for (Index j = 0; j < n_obs_farms; ++j)
    for (Index t = 0; t < L; ++t) {
      add_row(a_trip, j * L + t, j, t);
      m.y_[j * L + t] = input.y(j, t);
    }
  m.projector_.resize(n_obs_farms * L, dim);
  m.projector_.setFromTriplets(a_trip.begin(), a_trip.end());

  Triplets f_trip;
  const Index H = options.horizon;
  for (Index j = 0; j < n_targets; ++j)
    for (Index h = 1; h <= H; ++h) add_row(f_trip, j * H + (h - 1), j, L - 1 + h);
  m.forecast_projector_.resize(n_targets * H, dim);
  m.forecast_projector_.setFromTriplets(f_trip.begin(), f_trip.end());

  std::vector<SparseMatrix> terms;
  {
    Triplets t;
    for (Index i = 0; i < lay.n_intercepts; ++i) t.emplace_back(i, i, 1.0);
    terms.push_back(from_triplets(dim, t));
    m.term_tags_.push_back(kIntercept);
  }
  if (uses_ar(kind)) {
    const auto parts = ar1_parts(lay.chain_length);
    for (int p = 0; p < 3; ++p) {
      Triplets t;
      for (Index c = 0; c < lay.n_chains; ++c) add_block(t, parts[static_cast<std::size_t>(p)], lay.ar_index(c, 0));
      terms.push_back(from_triplets(dim, t));
      m.term_tags_.push_back(kArIdentity + p);
    }
  }
  if (uses_field(kind)) {
    const auto time_parts = ar1_parts(lay.n_knots);
    const auto& fem = m.domain_->fem;
    Triplets ct;
    for (Index i = 0; i < fem.size(); ++i) ct.emplace_back(i, i, fem.mass[i]);
    const std::array<SparseMatrix, 3> space_parts = {from_triplets(fem.size(), ct), fem.stiffness, fem.stiffness_sq};
    for (int tp = 0; tp < 3; ++tp)
      for (int sp = 0; sp < 3; ++sp) {
        const SparseMatrix kron = Eigen::kroneckerProduct(time_parts[static_cast<std::size_t>(tp)],
                                                          space_parts[static_cast<std::size_t>(sp)]);
        Triplets t;
        add_block(t, kron, lay.field_offset());
        terms.push_back(from_triplets(dim, t));
        m.term_tags_.push_back(kFieldFirst + 3 * tp + sp);
      }
  }
  terms.push_back(SparseMatrix(m.projector_.transpose() * m.projector_));
  m.term_tags_.push_back(kData);
  m.posterior_terms_ = TermCombination(terms);
  return m;
}

std::vector<double> LatentGaussianModel::posterior_coefficients(const Hyperparameters& th) const {
  validate(th, kind_);
  std::vector<double> c;
  c.reserve(term_tags_.size());
  const double tau2 = uses_field(kind_) ? std::pow(tau_from_sigma(th.sigma_w2, th.kappa), 2) : 0.0;
  const double k2 = th.kappa * th.kappa;
  for (int tag : term_tags_) {
    switch (tag) {
      case kIntercept: c.push_back(1.0 / prior_.intercept_variance); break;
      case kArIdentity: c.push_back(1.0 / th.sigma_nu2); break;
      case kArInterior: c.push_back(th.rho1 * th.rho1 / th.sigma_nu2); break;
      case kArOffDiagonal: c.push_back(-th.rho1 / th.sigma_nu2); break;
      case kData: c.push_back(1.0 / th.sigma_e2); break;
      default: {
        const int tp = (tag - kFieldFirst) / 3, sp = (tag - kFieldFirst) % 3;
        const double time_c = tp == 0 ? 1.0 : (tp == 1 ? th.rho2 * th.rho2 : -th.rho2);
        const double space_c = tau2 * (sp == 0 ? k2 * k2 : (sp == 1 ? 2.0 * k2 : 1.0));
        c.push_back(time_c * space_c);
      }
    }
  }
  return c;
}

std::vector<double> LatentGaussianModel::prior_coefficients(const Hyperparameters& th) const {
  auto c = posterior_coefficients(th);
  c.back() = 0.0;  // data term
  return c;
}

SparseMatrix LatentGaussianModel::prior_precision(const Hyperparameters& th) const {
  const auto c = prior_coefficients(th);
  const SparseMatrix lower = posterior_terms_.evaluate(c);
  SparseMatrix upper = lower.transpose();
  SparseMatrix full = lower + upper;
  full.diagonal() -= lower.diagonal();
  return full;
}

double LatentGaussianModel::log_det_spatial(double kappa, double tau) const {
  const auto& fem = domain_->fem;
  const double k2 = kappa * kappa;
  SparseMatrix c(fem.size(), fem.size());
  for (Index i = 0; i < fem.size(); ++i) c.insert(i, i) = fem.mass[i];
  const SparseMatrix q = k2 * k2 * c + 2.0 * k2 * fem.stiffness + fem.stiffness_sq;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt(q);
  if (llt.info() != Eigen::Success) throw IllConditionedError("spatial precision is not positive definite");
  const SparseMatrix l = llt.matrixL();
  return 2.0 * l.diagonal().array().log().sum() + static_cast<double>(fem.size()) * std::log(tau * tau);
}

double LatentGaussianModel::log_det_prior(const Hyperparameters& th) const {
  validate(th, kind_);
  double ld = -static_cast<double>(layout_.n_intercepts) * std::log(prior_.intercept_variance);
  if (uses_ar(kind_)) {
    ld += static_cast<double>(layout_.n_chains) *
          (-static_cast<double>(layout_.chain_length) * std::log(th.sigma_nu2) + std::log1p(-th.rho1 * th.rho1));
  }
  if (uses_field(kind_)) {
    const double tau = tau_from_sigma(th.sigma_w2, th.kappa);
    ld += static_cast<double>(layout_.n_vertices) * std::log1p(-th.rho2 * th.rho2) +
          static_cast<double>(layout_.n_knots) * log_det_spatial(th.kappa, tau);
  }
  return ld;
}

LatentGaussianModel assemble_T(const Window& window, const AssemblyOptions& options) {
  return assemble(ModelKind::kT, model_input(window, options.epsilon), nullptr, options);
}

LatentGaussianModel assemble_ST(const Window& window, std::shared_ptr<const SpatialDomain> domain,
                                const AssemblyOptions& options) {
  return assemble(ModelKind::kST, model_input(window, options.epsilon), std::move(domain), options);
}

LatentGaussianModel assemble_STT(const Window& window, std::shared_ptr<const SpatialDomain> domain,
                                 const AssemblyOptions& options) {
  return assemble(ModelKind::kSTT, model_input(window, options.epsilon), std::move(domain), options);
}

}  // namespace stwind
