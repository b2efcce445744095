#include "stwind/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <omp.h>

#include "stwind/error.hpp"
#include "stwind/rng.hpp"

namespace stwind {

MeshOptions MeshSettings::options() const {
  MeshOptions o;
  o.max_edge_inner = max_edge_inner_km.value_or(prior_range_km / 3.0);
  o.extension_factor = extension_factor;
  return o;
}

AssemblyOptions ExperimentConfig::assembly() const {
  AssemblyOptions o;
  o.knot_spacing = knot_spacing;
  o.horizon = horizon;
  o.epsilon = epsilon;
  o.prior = prior;
  return o;
}

const ModelScores& VerificationReport::scores(ModelKind kind) const {
  for (const auto& m : models)
    if (m.kind == kind) return m;
  throw ArgumentError("report has no results for model " + to_string(kind));
}

std::vector<ScoreTable> VerificationReport::tables() const {
  std::vector<ScoreTable> out;
  for (Scope scope : {Scope::kIndividual, Scope::kAggregated})
    for (const auto& m : models) out.push_back(m.scores.table(to_string(m.kind), scope));
  return out;
}

std::uint64_t VerificationReport::diagram_seed(ModelKind kind, Scope scope) const {
  return derive_seed(config.master_seed, {0xBA25, static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(scope)});
}

ReliabilityDiagram VerificationReport::diagram(ModelKind kind, Scope scope) const {
  return scores(kind).scores.diagram(scope, config.reliability.n_mc, config.reliability.band, diagram_seed(kind, scope));
}

namespace {

double quantile_of_sorted(const std::vector<double>& x, double p) {
  const double pos = static_cast<double>(x.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

RangeSummary VerificationReport::ranges(ModelKind kind) const {
  std::vector<double> r;
  for (const auto& f : fits)
    if (f.ok && f.kind == kind && kind != ModelKind::kT) r.push_back(f.fit.theta_hat.range());
  RangeSummary s;
  s.n = static_cast<Index>(r.size());
  if (r.empty()) return s;
  std::sort(r.begin(), r.end());
  s.q25 = quantile_of_sorted(r, 0.25);
  s.median = quantile_of_sorted(r, 0.5);
  s.q75 = quantile_of_sorted(r, 0.75);
  return s;
}

Portfolio prepare_portfolio(const Portfolio& p, const ExperimentConfig& cfg) {
  return filter_farms(p, cfg.max_zero_fraction);
}

std::shared_ptr<const SpatialDomain> make_domain(std::span<const Point> locations, const ExperimentConfig& cfg) {
  return std::make_shared<const SpatialDomain>(build_mesh(locations, cfg.mesh.options()));
}

WindowForecast forecast_window(const Window& window, ModelKind kind, const ExperimentConfig& cfg,
                               std::shared_ptr<const SpatialDomain> domain, std::uint64_t seed,
                               std::span<const Point> extra_targets) {
  ModelInput input = model_input(window, cfg.epsilon);
  input.locations.insert(input.locations.end(), extra_targets.begin(), extra_targets.end());
  auto options = cfg.assembly();
  options.horizon = window.horizon();
  const auto model = assemble(kind, input, kind == ModelKind::kT ? nullptr : std::move(domain), options);
  WindowForecast out;
  out.fit = fit_map(model, initial_hyperparameters(model), cfg.fit);
  out.fit.seed = seed;
  out.cube = predictive_samples(model, out.fit.theta_hat, cfg.n_samples, seed);
  return out;
}

namespace {

struct Unit {
  Index dataset = 0;
  Index window_index = 0;
  Index fold = -1;
  std::size_t model = 0;
};

struct UnitResult {
  FitRecord record;
  ScoreAccumulator scores;
};

int thread_count(const ExperimentConfig& cfg) { return cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads(); }

template <class Work>
std::vector<UnitResult> run_units(const std::vector<Unit>& units, const ExperimentConfig& cfg, Work&& work) {
  std::vector<UnitResult> results(units.size());
  const auto n = static_cast<std::int64_t>(units.size());
  auto one = [&](std::int64_t i) {
    auto& r = results[static_cast<std::size_t>(i)];
    try {
      work(units[static_cast<std::size_t>(i)], r);
    } catch (const std::exception& e) {
      r.record.ok = false;
      r.record.error = e.what();
    }
  };
  const int threads = thread_count(cfg);
  // A one-thread team makes CHOLMOD's inner regions active nested teams, which are rebuilt per supernode.
  if (threads <= 1) {
    for (std::int64_t i = 0; i < n; ++i) one(i);
    return results;
  }
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) one(i);
  return results;
}

VerificationReport merge_units(const std::string& scenario, const ExperimentConfig& cfg,
                               const std::vector<ModelKind>& models, std::vector<UnitResult>& results,
                               const std::vector<Unit>& units) {
  VerificationReport report;
  report.scenario = scenario;
  report.config = cfg;
  for (auto kind : models) report.models.push_back({kind, ScoreAccumulator(cfg.horizon, nominal_levels()), 0});
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& m = report.models[units[i].model];
    if (results[i].record.ok) m.scores.merge(results[i].scores);
    else ++m.failures;
    report.fits.push_back(std::move(results[i].record));
  }
  return report;
}

std::uint64_t unit_seed(const ExperimentConfig& cfg, std::uint64_t tag, const Unit& u, Index offset, ModelKind kind) {
  return derive_seed(cfg.master_seed, {tag, static_cast<std::uint64_t>(u.dataset), static_cast<std::uint64_t>(offset),
                                       static_cast<std::uint64_t>(u.fold + 1), static_cast<std::uint64_t>(kind)});
}

bool needs_domain(const std::vector<ModelKind>& models) {
  return std::any_of(models.begin(), models.end(), [](ModelKind k) { return k != ModelKind::kT; });
}

}  // namespace

VerificationReport run_rolling_eval(std::span<const Portfolio> portfolios, const ExperimentConfig& cfg,
                                    const std::string& scenario) {
  if (cfg.models.empty()) throw ArgumentError("no models selected");
  std::vector<std::vector<Window>> windows;
  std::vector<std::shared_ptr<const SpatialDomain>> domains;
  for (const auto& p : portfolios) {
    windows.push_back(make_windows(p, cfg.window_length, cfg.horizon, cfg.stride));
    domains.push_back(needs_domain(cfg.models) ? make_domain(p.locations(), cfg) : nullptr);
  }
  std::vector<Unit> units;
  for (std::size_t d = 0; d < portfolios.size(); ++d)
    for (std::size_t w = 0; w < windows[d].size(); ++w)
      for (std::size_t m = 0; m < cfg.models.size(); ++m)
        units.push_back({static_cast<Index>(d), static_cast<Index>(w), -1, m});

  auto results = run_units(units, cfg, [&](const Unit& u, UnitResult& r) {
    const auto& win = windows[static_cast<std::size_t>(u.dataset)][static_cast<std::size_t>(u.window_index)];
    const ModelKind kind = cfg.models[u.model];
    r.record = {scenario, u.dataset, win.offset, -1, kind, unit_seed(cfg, 0x7011, u, win.offset, kind), true, {}, {}};
    const auto fc = forecast_window(win, kind, cfg, domains[static_cast<std::size_t>(u.dataset)], r.record.seed);
    r.record.fit = fc.fit;
    r.scores = ScoreAccumulator(cfg.horizon, nominal_levels());
    const Eigen::VectorXd cap = win.train.capacities();
    r.scores.add(fc.cube, win.truth, std::span<const double>(cap.data(), static_cast<std::size_t>(cap.size())),
                 Execution::kSerial);
  });
  return merge_units(scenario, cfg, cfg.models, results, units);
}

VerificationReport run_rolling_eval(const Portfolio& p, const ExperimentConfig& cfg) {
  return run_rolling_eval(std::span<const Portfolio>(&p, 1), cfg);
}

std::vector<Index> assign_folds(std::span<const Point> locations, Index folds, bool blocked, std::uint64_t seed) {
  const auto n = static_cast<Index>(locations.size());
  if (folds < 1) throw PartitionError("need at least one fold");
  if (folds > n)
    throw PartitionError("cannot split " + std::to_string(n) + " farms into " + std::to_string(folds) +
                         " non-empty folds");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  if (blocked) {
    // Contiguous bands along the longer side of the bounding box.
    double x0 = locations[0].x, x1 = x0, y0 = locations[0].y, y1 = y0;
    for (auto p : locations) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    const bool along_x = (x1 - x0) >= (y1 - y0);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      const auto pa = locations[static_cast<std::size_t>(a)], pb = locations[static_cast<std::size_t>(b)];
      return along_x ? pa.x < pb.x : pa.y < pb.y;
    });
  } else {
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Index> fold(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k)
    fold[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = blocked ? k * folds / n : k % folds;
  return fold;
}

VerificationReport run_spatial_cv(std::span<const Portfolio> portfolios, const ExperimentConfig& cfg) {
  std::vector<ModelKind> models;
  for (auto k : cfg.models)
    if (k != ModelKind::kT) models.push_back(k);
  if (models.empty()) throw ArgumentError("spatial cross-validation needs S-T or ST+T");

  std::vector<Window> windows;
  std::vector<std::vector<Index>> folds;
  std::vector<std::shared_ptr<const SpatialDomain>> domains;
  for (std::size_t d = 0; d < portfolios.size(); ++d) {
    const auto& p = portfolios[d];
    auto w = make_windows(p, cfg.window_length, cfg.horizon, cfg.stride);
    windows.push_back(std::move(w.front()));
    const auto locs = p.locations();
    folds.push_back(
        assign_folds(locs, cfg.cv_folds, cfg.cv_blocked, derive_seed(cfg.master_seed, {0xF01D, static_cast<std::uint64_t>(d)})));
    domains.push_back(make_domain(locs, cfg));
  }
  std::vector<Unit> units;
  for (std::size_t d = 0; d < portfolios.size(); ++d)
    for (Index f = 0; f < cfg.cv_folds; ++f)
      for (std::size_t m = 0; m < models.size(); ++m) units.push_back({static_cast<Index>(d), 0, f, m});

  auto results = run_units(units, cfg, [&](const Unit& u, UnitResult& r) {
    const auto d = static_cast<std::size_t>(u.dataset);
    const Window& win = windows[d];
    const ModelKind kind = models[u.model];
    r.record = {"cv", u.dataset, win.offset, u.fold, kind, unit_seed(cfg, 0xC0DE, u, win.offset, kind), true, {}, {}};
    std::vector<Index> train, test;
    for (Index j = 0; j < win.train.n_farms(); ++j) (folds[d][static_cast<std::size_t>(j)] == u.fold ? test : train).push_back(j);
    if (train.empty()) throw PartitionError("fold leaves no training farms");
    Window fold_window{win.offset, win.train.select_farms(train), {}, win.horizon_times};
    fold_window.truth.resize(static_cast<Index>(train.size()), win.horizon());
    for (std::size_t k = 0; k < train.size(); ++k) fold_window.truth.row(static_cast<Index>(k)) = win.truth.row(train[k]);
    std::vector<Point> held;
    Eigen::MatrixXd truth(static_cast<Index>(test.size()), win.horizon());
    std::vector<double> cap;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto& farm = win.train.farms()[static_cast<std::size_t>(test[k])];
      held.push_back(farm.location);
      cap.push_back(farm.capacity);
      truth.row(static_cast<Index>(k)) = win.truth.row(test[k]);
    }
    const auto fc = forecast_window(fold_window, kind, cfg, domains[d], r.record.seed, held);
    r.record.fit = fc.fit;
    std::vector<Index> targets(test.size());
    std::iota(targets.begin(), targets.end(), static_cast<Index>(train.size()));
    r.scores = ScoreAccumulator(cfg.horizon, nominal_levels());
    r.scores.add(select_targets(fc.cube, targets), truth, cap, Execution::kSerial);
  });
  return merge_units("cv", cfg, models, results, units);
}

VerificationReport run_spatial_cv(const Portfolio& p, const ExperimentConfig& cfg) {
  return run_spatial_cv(std::span<const Portfolio>(&p, 1), cfg);
}

std::vector<Portfolio> simulate_datasets(const ExperimentConfig& cfg) {
  const auto& s = cfg.simulation;
  std::vector<Portfolio> out;
  SimulationOptions opt;
  opt.knot_spacing = cfg.knot_spacing;
  opt.mesh = cfg.mesh.options();
  for (Index d = 0; d < s.n_datasets; ++d) {
    const auto locs = uniform_locations(s.n_farms, s.width_km, s.height_km,
                                        derive_seed(cfg.master_seed, {0x5111, static_cast<std::uint64_t>(d), 0}));
    out.push_back(simulate_stt(s.truth, locs, s.t_steps, derive_seed(cfg.master_seed, {0x5111, static_cast<std::uint64_t>(d), 1}),
                               opt));
  }
  return out;
}

VerificationReport run_simulation_study(const ExperimentConfig& cfg) {
  if (cfg.simulation.t_steps < cfg.window_length + cfg.horizon)
    throw ArgumentError("simulated series shorter than one window (L + H)");
  const auto data = simulate_datasets(cfg);
  return run_rolling_eval(data, cfg, "simulation");
}

}  // namespace stwind
