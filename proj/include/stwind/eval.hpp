#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stwind/inference.hpp"
#include "stwind/kernels.hpp"

namespace stwind {

/// 0.05, 0.10, ..., 0.95
std::vector<double> nominal_levels();

/// Per-entry sample mean, targets x H.
Eigen::MatrixXd point_forecast(const SampleCube& cube);

/// Per-h RMSE over rows, as % of nominal power. Shapes must match.
Eigen::VectorXd rmse(const Eigen::MatrixXd& point, const Eigen::MatrixXd& truth);

/// Per-h mean sample CRPS over targets, as % of nominal power.
Eigen::VectorXd crps(const SampleCube& cube, const Eigen::MatrixXd& truth, Execution exec = Execution::kParallel);

/// Sample CRPS of one case (unscaled).
double crps_sample(std::span<const double> samples, double truth);

/// Capacity-weighted aggregate per sample: H x n_samples.
RowMatrix aggregate_samples(const SampleCube& cube, std::span<const double> capacities);
/// Aggregate of a targets x H truth matrix: length H.
Eigen::VectorXd aggregate_truth(const Eigen::MatrixXd& truth, std::span<const double> capacities);

/// Restricts a cube to the given targets, in the given order.
SampleCube select_targets(const SampleCube& cube, std::span<const Index> targets);

/// Permutes the sample index independently for every target (same permutation
/// across lead times of one target), dropping cross-target dependence.
SampleCube shuffle_samples_independently(const SampleCube& cube, std::uint64_t seed);

struct ConsistencyBars {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Central `band` interval of Binomial(n_cases, alpha) / n_cases per alpha,
/// from n_mc seeded draws.
ConsistencyBars consistency_bars(std::int64_t n_cases, std::span<const double> alphas, std::int64_t n_mc = 10000,
                                 double band = 0.9, std::uint64_t seed = 0, Execution exec = Execution::kParallel);

struct ReliabilityDiagram {
  std::vector<double> levels;
  Eigen::MatrixXi hits;         // H x levels: truth <= quantile forecast
  Eigen::VectorXi n_cases;      // per h
  Eigen::MatrixXd bar_lower;    // H x levels
  Eigen::MatrixXd bar_upper;
  std::uint64_t seed = 0;

  Index horizon() const { return hits.rows(); }
  double coverage(Index h, Index level) const;  // h is 1-based
  Eigen::MatrixXd coverage() const;             // H x levels
  bool within_bars(Index h, Index level) const;
};

/// Adds hit counts for the cases in the rows of `samples`; case i has lead
/// time lead_times[i] (1-based).
void add_reliability(const RowMatrix& samples, std::span<const double> truth, std::span<const Index> lead_times,
                     ReliabilityDiagram& diagram, Execution exec = Execution::kParallel);

/// Empty diagram (no cases) for the given horizon and levels.
ReliabilityDiagram empty_diagram(Index horizon, std::vector<double> levels);
/// Fills bar_lower / bar_upper from the case counts.
void fill_bars(ReliabilityDiagram& diagram, std::int64_t n_mc, double band, std::uint64_t seed,
               Execution exec = Execution::kParallel);

/// Reliability of a cube against truth, all cases, bars filled in.
ReliabilityDiagram reliability(const SampleCube& cube, const Eigen::MatrixXd& truth, std::span<const double> levels,
                               std::int64_t n_mc = 10000, double band = 0.9, std::uint64_t seed = 0);

enum class Scope { kIndividual, kAggregated };
std::string to_string(Scope scope);

/// Running sums for one (model, scope) across windows/folds.
struct ScoreSums {
  Eigen::VectorXd sq_error;  // per h
  Eigen::VectorXd crps;
  Eigen::VectorXi cases;
  Index windows = 0;
  Index targets = 0;  // targets in the last added window
  ReliabilityDiagram reliability;

  ScoreSums() = default;
  ScoreSums(Index horizon, std::vector<double> levels);
  void merge(const ScoreSums& other);
};

struct ScoreRow {
  Index h = 0;
  double rmse_pct = 0.0;
  double crps_pct = 0.0;
};

struct ScoreTable {
  std::string model;
  Scope scope = Scope::kIndividual;
  Index windows = 0;
  Index farms = 0;
  std::vector<ScoreRow> rows;
};

/// Individual and aggregated scores of one model.
class ScoreAccumulator {
 public:
  ScoreAccumulator() = default;
  ScoreAccumulator(Index horizon, std::vector<double> levels);

  /// Adds one window: cube targets align with truth rows and capacities.
  void add(const SampleCube& cube, const Eigen::MatrixXd& truth, std::span<const double> capacities,
           Execution exec = Execution::kParallel);
  void merge(const ScoreAccumulator& other);

  const ScoreSums& sums(Scope scope) const { return scope == Scope::kIndividual ? individual_ : aggregated_; }
  ScoreTable table(const std::string& model, Scope scope) const;
  /// Coverage with consistency bars for the case counts seen so far.
  ReliabilityDiagram diagram(Scope scope, std::int64_t n_mc, double band, std::uint64_t seed,
                             Execution exec = Execution::kParallel) const;

 private:
  ScoreSums individual_;
  ScoreSums aggregated_;
};

/// scope,model,h,rmse_pct,crps_pct
void write_scores_csv(std::span<const ScoreTable> tables, std::ostream& out);
std::string reliability_to_json(const ReliabilityDiagram& diagram, const std::string& model, Scope scope);

}  // namespace stwind
