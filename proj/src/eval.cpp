#include "stwind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "stwind/error.hpp"
#include "stwind/rng.hpp"
#include "stwind/transform.hpp"

namespace stwind {

std::vector<double> nominal_levels() {
  std::vector<double> out;
  for (int k = 1; k <= 19; ++k) out.push_back(0.05 * k);
  return out;
}

Eigen::MatrixXd point_forecast(const SampleCube& cube) {
  std::vector<double> means(static_cast<std::size_t>(cube.values.rows()));
  kernels::mean_rows(cube.values, means, Execution::kSerial);
  Eigen::MatrixXd out(cube.n_targets, cube.horizon);
  for (Index j = 0; j < cube.n_targets; ++j)
    for (Index h = 0; h < cube.horizon; ++h) out(j, h) = means[static_cast<std::size_t>(j * cube.horizon + h)];
  return out;
}

Eigen::VectorXd rmse(const Eigen::MatrixXd& point, const Eigen::MatrixXd& truth) {
  if (point.rows() != truth.rows() || point.cols() != truth.cols())
    throw DimensionError("rmse: forecast and truth shapes differ");
  if (point.rows() == 0) throw DimensionError("rmse: no cases");
  return 100.0 * ((point - truth).array().square().colwise().sum() / static_cast<double>(point.rows())).sqrt().transpose();
}

double crps_sample(std::span<const double> samples, double truth) {
  RowMatrix m(1, static_cast<Index>(samples.size()));
  std::copy(samples.begin(), samples.end(), m.data());
  double out = 0.0;
  kernels::crps_rows(m, std::span<const double>(&truth, 1), std::span<double>(&out, 1), Execution::kSerial);
  return out;
}

namespace {

void check_truth(const SampleCube& cube, const Eigen::MatrixXd& truth) {
  if (truth.rows() != cube.n_targets || truth.cols() != cube.horizon)
    throw DimensionError("truth must be targets x H matching the sample cube");
}

// Truth laid out like cube rows.
std::vector<double> flat_truth(const SampleCube& cube, const Eigen::MatrixXd& truth) {
  std::vector<double> out(static_cast<std::size_t>(cube.n_targets * cube.horizon));
  for (Index j = 0; j < cube.n_targets; ++j)
    for (Index h = 0; h < cube.horizon; ++h) out[static_cast<std::size_t>(j * cube.horizon + h)] = truth(j, h);
  return out;
}

std::vector<Index> flat_leads(const SampleCube& cube) {
  std::vector<Index> out;
  for (Index j = 0; j < cube.n_targets; ++j)
    for (Index h = 1; h <= cube.horizon; ++h) out.push_back(h);
  return out;
}

}  // namespace

Eigen::VectorXd crps(const SampleCube& cube, const Eigen::MatrixXd& truth, Execution exec) {
  check_truth(cube, truth);
  if (cube.n_samples() < 2) throw ArgumentError("crps needs at least 2 samples");
  const auto y = flat_truth(cube, truth);
  std::vector<double> per(y.size());
  kernels::crps_rows(cube.values, y, per, exec);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cube.horizon);
  for (Index j = 0; j < cube.n_targets; ++j)
    for (Index h = 0; h < cube.horizon; ++h) out[h] += per[static_cast<std::size_t>(j * cube.horizon + h)];
  return 100.0 * out / static_cast<double>(cube.n_targets);
}

RowMatrix aggregate_samples(const SampleCube& cube, std::span<const double> capacities) {
  if (static_cast<Index>(capacities.size()) != cube.n_targets)
    throw DimensionError("one capacity per cube target required");
  const double total = std::accumulate(capacities.begin(), capacities.end(), 0.0);
  if (!(total > 0.0)) throw DomainError("capacities must sum to a positive value");
  RowMatrix out = RowMatrix::Zero(cube.horizon, cube.n_samples());
  for (Index j = 0; j < cube.n_targets; ++j)
    out += capacities[static_cast<std::size_t>(j)] * cube.values.middleRows(j * cube.horizon, cube.horizon);
  return out / total;
}

Eigen::VectorXd aggregate_truth(const Eigen::MatrixXd& truth, std::span<const double> capacities) {
  if (static_cast<Index>(capacities.size()) != truth.rows()) throw DimensionError("one capacity per truth row");
  Eigen::VectorXd out(truth.cols());
  std::vector<double> col(static_cast<std::size_t>(truth.rows()));
  for (Index h = 0; h < truth.cols(); ++h) {
    for (Index j = 0; j < truth.rows(); ++j) col[static_cast<std::size_t>(j)] = truth(j, h);
    out[h] = aggregate(col, capacities);
  }
  return out;
}

SampleCube select_targets(const SampleCube& cube, std::span<const Index> targets) {
  SampleCube out = cube;
  out.n_targets = static_cast<Index>(targets.size());
  out.values.resize(out.n_targets * cube.horizon, cube.n_samples());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < 0 || targets[k] >= cube.n_targets) throw DimensionError("select_targets: index out of range");
    out.values.middleRows(static_cast<Index>(k) * cube.horizon, cube.horizon) =
        cube.values.middleRows(targets[k] * cube.horizon, cube.horizon);
  }
  return out;
}

SampleCube shuffle_samples_independently(const SampleCube& cube, std::uint64_t seed) {
  SampleCube out = cube;
  std::vector<Index> perm(static_cast<std::size_t>(cube.n_samples()));
  for (Index j = 0; j < cube.n_targets; ++j) {
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(j)}));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Index h = 0; h < cube.horizon; ++h)
      for (Index s = 0; s < cube.n_samples(); ++s)
        out.values(j * cube.horizon + h, s) = cube.values(j * cube.horizon + h, perm[static_cast<std::size_t>(s)]);
  }
  return out;
}

namespace {

double sorted_quantile(const double* x, Index n, double p) {
  const double pos = static_cast<double>(n - 1) * p;
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min(lo + 1, n - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

ConsistencyBars consistency_bars(std::int64_t n_cases, std::span<const double> alphas, std::int64_t n_mc, double band,
                                 std::uint64_t seed, Execution exec) {
  if (!(band > 0.0 && band < 1.0)) throw ArgumentError("consistency band must lie in (0, 1)");
  RowMatrix draws;
  kernels::binomial_coverage_draws(n_cases, alphas, n_mc, seed, draws, exec);
  ConsistencyBars out;
  for (Index a = 0; a < draws.rows(); ++a) {
    out.lower.push_back(sorted_quantile(draws.row(a).data(), n_mc, 0.5 * (1.0 - band)));
    out.upper.push_back(sorted_quantile(draws.row(a).data(), n_mc, 0.5 * (1.0 + band)));
  }
  return out;
}

double ReliabilityDiagram::coverage(Index h, Index level) const {
  const int n = n_cases[h - 1];
  return n > 0 ? static_cast<double>(hits(h - 1, level)) / n : 0.0;
}

Eigen::MatrixXd ReliabilityDiagram::coverage() const {
  Eigen::MatrixXd out(hits.rows(), hits.cols());
  for (Index h = 1; h <= hits.rows(); ++h)
    for (Index a = 0; a < hits.cols(); ++a) out(h - 1, a) = coverage(h, a);
  return out;
}

bool ReliabilityDiagram::within_bars(Index h, Index level) const {
  const double c = coverage(h, level);
  return c >= bar_lower(h - 1, level) && c <= bar_upper(h - 1, level);
}

ReliabilityDiagram empty_diagram(Index horizon, std::vector<double> levels) {
  ReliabilityDiagram d;
  const auto nl = static_cast<Index>(levels.size());
  d.levels = std::move(levels);
  d.hits = Eigen::MatrixXi::Zero(horizon, nl);
  d.n_cases = Eigen::VectorXi::Zero(horizon);
  d.bar_lower = Eigen::MatrixXd::Zero(horizon, nl);
  d.bar_upper = Eigen::MatrixXd::Zero(horizon, nl);
  return d;
}

void add_reliability(const RowMatrix& samples, std::span<const double> truth, std::span<const Index> lead_times,
                     ReliabilityDiagram& diagram, Execution exec) {
  if (static_cast<Index>(truth.size()) != samples.rows() || lead_times.size() != truth.size())
    throw DimensionError("reliability: one truth value and lead time per case");
  RowMatrix q;
  kernels::quantile_rows(samples, diagram.levels, q, exec);
  for (Index c = 0; c < samples.rows(); ++c) {
    const Index h = lead_times[static_cast<std::size_t>(c)];
    if (h < 1 || h > diagram.horizon()) throw DimensionError("reliability: lead time out of range");
    diagram.n_cases[h - 1] += 1;
    for (Index a = 0; a < q.cols(); ++a)
      if (truth[static_cast<std::size_t>(c)] <= q(c, a)) diagram.hits(h - 1, a) += 1;
  }
}

void fill_bars(ReliabilityDiagram& d, std::int64_t n_mc, double band, std::uint64_t seed, Execution exec) {
  d.seed = seed;
  std::map<int, ConsistencyBars> cache;
  for (Index h = 0; h < d.horizon(); ++h) {
    const int n = d.n_cases[h];
    if (n < 1) continue;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, consistency_bars(n, d.levels, n_mc, band, seed, exec)).first;
    for (Index a = 0; a < static_cast<Index>(d.levels.size()); ++a) {
      d.bar_lower(h, a) = it->second.lower[static_cast<std::size_t>(a)];
      d.bar_upper(h, a) = it->second.upper[static_cast<std::size_t>(a)];
    }
  }
}

ReliabilityDiagram reliability(const SampleCube& cube, const Eigen::MatrixXd& truth, std::span<const double> levels,
                               std::int64_t n_mc, double band, std::uint64_t seed) {
  check_truth(cube, truth);
  auto d = empty_diagram(cube.horizon, {levels.begin(), levels.end()});
  add_reliability(cube.values, flat_truth(cube, truth), flat_leads(cube), d);
  fill_bars(d, n_mc, band, seed);
  return d;
}

std::string to_string(Scope scope) { return scope == Scope::kIndividual ? "individual" : "aggregated"; }

ScoreSums::ScoreSums(Index horizon, std::vector<double> levels)
    : sq_error(Eigen::VectorXd::Zero(horizon)), crps(Eigen::VectorXd::Zero(horizon)),
      cases(Eigen::VectorXi::Zero(horizon)), reliability(empty_diagram(horizon, std::move(levels))) {}

void ScoreSums::merge(const ScoreSums& o) {
  sq_error += o.sq_error;
  crps += o.crps;
  cases += o.cases;
  windows += o.windows;
  targets = std::max(targets, o.targets);
  reliability.hits += o.reliability.hits;
  reliability.n_cases += o.reliability.n_cases;
}

ScoreAccumulator::ScoreAccumulator(Index horizon, std::vector<double> levels)
    : individual_(horizon, levels), aggregated_(horizon, levels) {}

void ScoreAccumulator::add(const SampleCube& cube, const Eigen::MatrixXd& truth, std::span<const double> capacities,
                           Execution exec) {
  check_truth(cube, truth);
  const Index H = cube.horizon;
  if (individual_.sq_error.size() != H) throw DimensionError("accumulator horizon differs from the cube");

  {
    const auto y = flat_truth(cube, truth);
    const auto leads = flat_leads(cube);
    std::vector<double> per(y.size()), mean(y.size());
    kernels::crps_rows(cube.values, y, per, exec);
    kernels::mean_rows(cube.values, mean, exec);
    for (std::size_t r = 0; r < y.size(); ++r) {
      const Index h = leads[r] - 1;
      individual_.sq_error[h] += (mean[r] - y[r]) * (mean[r] - y[r]);
      individual_.crps[h] += per[r];
      individual_.cases[h] += 1;
    }
    add_reliability(cube.values, y, leads, individual_.reliability, exec);
    individual_.windows += 1;
    individual_.targets = cube.n_targets;
  }
  {
    const RowMatrix agg = aggregate_samples(cube, capacities);
    const Eigen::VectorXd yv = aggregate_truth(truth, capacities);
    const std::vector<double> y(yv.data(), yv.data() + yv.size());
    std::vector<Index> leads(static_cast<std::size_t>(H));
    std::iota(leads.begin(), leads.end(), Index{1});
    std::vector<double> per(y.size()), mean(y.size());
    kernels::crps_rows(agg, y, per, exec);
    kernels::mean_rows(agg, mean, exec);
    for (Index h = 0; h < H; ++h) {
      const auto r = static_cast<std::size_t>(h);
      aggregated_.sq_error[h] += (mean[r] - y[r]) * (mean[r] - y[r]);
      aggregated_.crps[h] += per[r];
      aggregated_.cases[h] += 1;
    }
    add_reliability(agg, y, leads, aggregated_.reliability, exec);
    aggregated_.windows += 1;
    aggregated_.targets = cube.n_targets;
  }
}

void ScoreAccumulator::merge(const ScoreAccumulator& other) {
  if (individual_.sq_error.size() == 0) {
    *this = other;
    return;
  }
  individual_.merge(other.individual_);
  aggregated_.merge(other.aggregated_);
}

ScoreTable ScoreAccumulator::table(const std::string& model, Scope scope) const {
  const auto& s = sums(scope);
  ScoreTable t;
  t.model = model;
  t.scope = scope;
  t.windows = s.windows;
  t.farms = scope == Scope::kIndividual ? s.targets : 1;
  for (Index h = 0; h < s.sq_error.size(); ++h) {
    const double n = std::max(1, s.cases[h]);
    t.rows.push_back({h + 1, 100.0 * std::sqrt(s.sq_error[h] / n), 100.0 * s.crps[h] / n});
  }
  return t;
}

ReliabilityDiagram ScoreAccumulator::diagram(Scope scope, std::int64_t n_mc, double band, std::uint64_t seed,
                                             Execution exec) const {
  auto d = sums(scope).reliability;
  fill_bars(d, n_mc, band, seed, exec);
  return d;
}

void write_scores_csv(std::span<const ScoreTable> tables, std::ostream& out) {
  out << "scope,model,h,rmse_pct,crps_pct\n";
  char buf[64];
  for (const auto& t : tables)
    for (const auto& r : t.rows) {
      out << to_string(t.scope) << ',' << t.model << ',' << r.h << ',';
      std::snprintf(buf, sizeof buf, "%.10g,%.10g", r.rmse_pct, r.crps_pct);
      out << buf << '\n';
    }
}

std::string reliability_to_json(const ReliabilityDiagram& d, const std::string& model, Scope scope) {
  nlohmann::json j;
  j["model"] = model;
  j["scope"] = to_string(scope);
  j["levels"] = d.levels;
  j["seed"] = d.seed;
  auto rows = nlohmann::json::array();
  for (Index h = 1; h <= d.horizon(); ++h) {
    nlohmann::json r;
    r["h"] = h;
    std::vector<double> cov, lo, hi;
    std::vector<int> hit, miss;
    for (Index a = 0; a < static_cast<Index>(d.levels.size()); ++a) {
      cov.push_back(d.coverage(h, a));
      lo.push_back(d.bar_lower(h - 1, a));
      hi.push_back(d.bar_upper(h - 1, a));
      hit.push_back(d.hits(h - 1, a));
      miss.push_back(d.n_cases[h - 1] - d.hits(h - 1, a));
    }
    r["coverage"] = cov;
    r["bars"] = {{"lower", lo}, {"upper", hi}};
    r["counts"] = {{"n_cases", d.n_cases[h - 1]}, {"hits", hit}, {"misses", miss}};
    rows.push_back(r);
  }
  j["lead_times"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace stwind
