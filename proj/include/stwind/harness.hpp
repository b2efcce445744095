#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stwind/data.hpp"
#include "stwind/eval.hpp"
#include "stwind/inference.hpp"
#include "stwind/mesh.hpp"
#include "stwind/model.hpp"
#include "stwind/simulate.hpp"

namespace stwind {

struct MeshSettings {
  double extension_factor = 0.3;
  double prior_range_km = 60.0;
  std::optional<double> max_edge_inner_km;  // default prior_range_km / 3

  MeshOptions options() const;
  friend bool operator==(const MeshSettings&, const MeshSettings&) = default;
};

struct ReliabilitySettings {
  std::int64_t n_mc = 10000;
  double band = 0.9;
  friend bool operator==(const ReliabilitySettings&, const ReliabilitySettings&) = default;
};

struct SimulationSettings {
  Index n_datasets = 20;
  Index n_farms = 50;
  Index t_steps = 212;
  double width_km = 150.0;
  double height_km = 200.0;
  SimulationTruth truth;
  friend bool operator==(const SimulationSettings&, const SimulationSettings&) = default;
};

struct ExperimentConfig {
  std::vector<ModelKind> models{ModelKind::kT, ModelKind::kST, ModelKind::kSTT};
  Index window_length = 192;
  Index horizon = 20;
  Index stride = 192;
  Index knot_spacing = 12;
  Index n_samples = 1000;
  Index cv_folds = 5;
  bool cv_blocked = false;
  std::uint64_t master_seed = 1;
  double max_zero_fraction = 0.10;
  double epsilon = kDefaultEpsilon;
  CoordinateSystem coordinates = CoordinateSystem::kPlanarKm;
  MeshSettings mesh;
  PriorSettings prior;
  FitOptions fit;
  std::vector<double> quantiles{0.05, 0.5, 0.95};
  ReliabilitySettings reliability;
  SimulationSettings simulation;
  int jobs = 0;  // 0: all available threads

  AssemblyOptions assembly() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// One fitted unit of work.
struct FitRecord {
  std::string scenario;
  Index dataset = 0;
  Index window = 0;  // window offset in steps
  Index fold = -1;
  ModelKind kind = ModelKind::kT;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  FitResult fit;
};

struct ModelScores {
  ModelKind kind = ModelKind::kT;
  ScoreAccumulator scores;
  Index failures = 0;
};

struct RangeSummary {
  Index n = 0;
  double q25 = 0.0, median = 0.0, q75 = 0.0;
  double iqr() const { return q75 - q25; }
};

struct VerificationReport {
  std::string scenario;  // rolling | cv | simulation
  ExperimentConfig config;
  std::vector<ModelScores> models;
  std::vector<FitRecord> fits;

  const ModelScores& scores(ModelKind kind) const;
  std::vector<ScoreTable> tables() const;
  /// Diagram with bars; the bar seed is derived from the master seed, model and scope.
  ReliabilityDiagram diagram(ModelKind kind, Scope scope) const;
  std::uint64_t diagram_seed(ModelKind kind, Scope scope) const;
  /// Quartiles of sqrt(8)/kappa over successful fits of `kind`.
  RangeSummary ranges(ModelKind kind) const;
};

/// Drops farms with too many zero observations.
Portfolio prepare_portfolio(const Portfolio& p, const ExperimentConfig& cfg);

/// Mesh over all farm locations of `p`, with the configured settings.
std::shared_ptr<const SpatialDomain> make_domain(std::span<const Point> locations, const ExperimentConfig& cfg);

/// Fits `kind` on the window's training farms and forecasts at the training
/// farms followed by `extra_targets`.
struct WindowForecast {
  FitResult fit;
  SampleCube cube;
};
WindowForecast forecast_window(const Window& window, ModelKind kind, const ExperimentConfig& cfg,
                               std::shared_ptr<const SpatialDomain> domain, std::uint64_t seed,
                               std::span<const Point> extra_targets = {});

/// Rolling windows, all configured models, scored individually and aggregated.
VerificationReport run_rolling_eval(std::span<const Portfolio> portfolios, const ExperimentConfig& cfg,
                                    const std::string& scenario = "rolling");
VerificationReport run_rolling_eval(const Portfolio& p, const ExperimentConfig& cfg);

/// Farm index -> fold. Throws PartitionError if a fold would be empty.
std::vector<Index> assign_folds(std::span<const Point> locations, Index folds, bool blocked, std::uint64_t seed);

/// k-fold spatial cross-validation on the first window of each portfolio
/// (spatial models only). Held-out farms are scored individually and as an
/// aggregate per fold.
VerificationReport run_spatial_cv(std::span<const Portfolio> portfolios, const ExperimentConfig& cfg);
VerificationReport run_spatial_cv(const Portfolio& p, const ExperimentConfig& cfg);

std::vector<Portfolio> simulate_datasets(const ExperimentConfig& cfg);
/// Simulated data sets, one window each, all configured models.
VerificationReport run_simulation_study(const ExperimentConfig& cfg);

}  // namespace stwind
