#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stwind/data.hpp"
#include "stwind/precision_terms.hpp"
#include "stwind/spde.hpp"
#include "stwind/transform.hpp"

namespace stwind {

/// T: per-farm intercept + independent AR(1) chains.
/// S-T: shared intercept + SPDE field with AR(1) dynamics over knots.
/// ST+T: shared intercept + AR(1) chains + the S-T field.
enum class ModelKind { kT, kST, kSTT };

std::string to_string(ModelKind kind);
/// Accepts "T", "S-T", "ST+T".
ModelKind parse_model_kind(std::string_view text);

struct Hyperparameters {
  double sigma_e2 = 0.05;   // measurement error variance
  double sigma_nu2 = 0.1;   // AR innovation variance
  double rho1 = 0.8;        // AR coefficient of the per-farm chains
  double rho2 = 0.5;        // AR coefficient of the field over knots
  double sigma_w2 = 0.5;    // field innovation variance
  double kappa = 0.05;      // Matern scale, 1/km

  double range() const { return range_from_kappa(kappa); }

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Throws DomainError if a parameter used by `kind` is out of its domain.
void validate(const Hyperparameters& theta, ModelKind kind);

/// Names of the parameters `kind` uses, in unconstrained-vector order.
std::vector<std::string> active_parameters(ModelKind kind);

/// log((1 + rho) / (1 - rho)) and its inverse.
double correlation_to_internal(double rho);
double correlation_from_internal(double z);

/// Log variances, log kappa, transformed correlations, for the active subset.
Eigen::VectorXd to_unconstrained(const Hyperparameters& theta, ModelKind kind);
/// Inactive fields are copied from `base`.
Hyperparameters from_unconstrained(const Eigen::VectorXd& u, ModelKind kind, const Hyperparameters& base = {});

struct PriorSettings {
  double precision_shape = 1.0;   // log-Gamma on log precisions (and log kappa^2)
  double precision_rate = 5e-5;
  double correlation_sd = 1.0;    // Gaussian on log((1 + rho) / (1 - rho))
  double intercept_variance = 100.0;

  friend bool operator==(const PriorSettings&, const PriorSettings&) = default;
};

double log_hyperprior(const Hyperparameters& theta, ModelKind kind, const PriorSettings& prior = {});

enum class InterceptMode { kPerFarm, kShared };

/// Stacked latent vector: [intercepts | AR chains (farm-major) | field
/// (knot-major, vertices within a knot)].
struct LatentLayout {
  ModelKind kind = ModelKind::kT;
  Index n_intercepts = 0;
  Index n_chains = 0;
  Index chain_length = 0;
  Index n_vertices = 0;
  Index n_knots = 0;

  Index ar_offset() const { return n_intercepts; }
  Index field_offset() const { return n_intercepts + n_chains * chain_length; }
  Index dimension() const { return field_offset() + n_vertices * n_knots; }
  Index ar_index(Index farm, Index t) const { return ar_offset() + farm * chain_length + t; }
  Index field_index(Index knot, Index vertex) const { return field_offset() + knot * n_vertices + vertex; }
};

/// Mesh plus its finite element matrices, shared by all models on a domain.
struct SpatialDomain {
  Mesh mesh;
  FemMatrices fem;

  explicit SpatialDomain(Mesh m);
};

struct AssemblyOptions {
  Index knot_spacing = 12;
  Index horizon = 0;  // latent time axes extended this many steps past the training data
  double epsilon = kDefaultEpsilon;
  PriorSettings prior;
  std::optional<InterceptMode> intercept;  // default: per-farm for T, shared otherwise
};

/// Training data on the transformed scale. The first `y.rows()` locations are
/// observed; any further locations are forecast-only.
struct ModelInput {
  std::vector<Point> locations;
  Eigen::MatrixXd y;  // observed farms x L
};

ModelInput model_input(const Window& window, double epsilon = kDefaultEpsilon);

/// Linear-Gaussian system y = A eta + e, eta ~ N(0, Q(theta)^-1), e ~ N(0, sigma_e2 I).
class LatentGaussianModel {
 public:
  ModelKind kind() const { return kind_; }
  const LatentLayout& layout() const { return layout_; }
  Index dimension() const { return layout_.dimension(); }
  Index n_observations() const { return y_.size(); }
  Index training_length() const { return training_length_; }
  Index horizon() const { return horizon_; }
  Index n_targets() const { return static_cast<Index>(locations_.size()); }
  const std::vector<Point>& locations() const { return locations_; }
  const std::shared_ptr<const SpatialDomain>& domain() const { return domain_; }
  const KnotGrid& knots() const { return knots_; }
  InterceptMode intercept_mode() const { return intercept_mode_; }
  const PriorSettings& prior_settings() const { return prior_; }

  /// Observation rows: farm * L + t for observed farms.
  const SparseMatrix& projector() const { return projector_; }
  const Eigen::VectorXd& observations() const { return y_; }
  /// Forecast rows: target * H + (h - 1), at step L - 1 + h. Empty when H = 0.
  const SparseMatrix& forecast_projector() const { return forecast_projector_; }

  /// Full symmetric prior precision.
  SparseMatrix prior_precision(const Hyperparameters& theta) const;
  double log_det_prior(const Hyperparameters& theta) const;

  /// Prior terms followed by A^T A; pattern fixed across theta.
  const TermCombination& posterior_terms() const { return posterior_terms_; }
  std::vector<double> posterior_coefficients(const Hyperparameters& theta) const;

 private:
  friend LatentGaussianModel assemble(ModelKind, const ModelInput&, std::shared_ptr<const SpatialDomain>,
                                      const AssemblyOptions&);
  LatentGaussianModel() = default;

  std::vector<double> prior_coefficients(const Hyperparameters& theta) const;
  double log_det_spatial(double kappa, double tau) const;

  ModelKind kind_ = ModelKind::kT;
  LatentLayout layout_;
  InterceptMode intercept_mode_ = InterceptMode::kPerFarm;
  PriorSettings prior_;
  Index training_length_ = 0;
  Index horizon_ = 0;
  KnotGrid knots_;
  std::vector<Point> locations_;
  std::shared_ptr<const SpatialDomain> domain_;
  SparseMatrix projector_;
  SparseMatrix forecast_projector_;
  Eigen::VectorXd y_;
  // Which coefficient each posterior term takes; see model.cpp.
  std::vector<int> term_tags_;
  TermCombination posterior_terms_;
};

LatentGaussianModel assemble(ModelKind kind, const ModelInput& input, std::shared_ptr<const SpatialDomain> domain,
                             const AssemblyOptions& options = {});

LatentGaussianModel assemble_T(const Window& window, const AssemblyOptions& options = {});
LatentGaussianModel assemble_ST(const Window& window, std::shared_ptr<const SpatialDomain> domain,
                                const AssemblyOptions& options = {});
LatentGaussianModel assemble_STT(const Window& window, std::shared_ptr<const SpatialDomain> domain,
                                 const AssemblyOptions& options = {});

}  // namespace stwind
