#include "stwind/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stwind/config.hpp"
#include "stwind/error.hpp"
#include "stwind/eval.hpp"
#include "stwind/harness.hpp"
#include "stwind/inference.hpp"
#include "stwind/report.hpp"
#include "stwind/rng.hpp"

namespace stwind::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string model;
  std::uint64_t seed = 0;
  bool has_seed = false;
  int jobs = -1;
  Index n_samples = 0;
  Index n_datasets = 0;
  int max_iter = 0;
};

ExperimentConfig resolve_config(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  if (!o.model.empty()) cfg.models = {parse_model_kind(o.model)};
  if (o.has_seed) cfg.master_seed = o.seed;
  if (o.jobs >= 0) cfg.jobs = o.jobs;
  if (o.n_samples > 0) cfg.n_samples = o.n_samples;
  if (o.n_datasets > 0) cfg.simulation.n_datasets = o.n_datasets;
  if (o.max_iter > 0) cfg.fit.max_iter = o.max_iter;
  return cfg;
}

Portfolio load_data(const std::string& path, const ExperimentConfig& cfg) {
  if (!fs::exists(path)) throw Error("data file not found: " + path);
  return prepare_portfolio(load_portfolio(path, {cfg.coordinates}), cfg);
}

// Last L steps as a training window with no truth.
Window last_window(const Portfolio& p, const ExperimentConfig& cfg) {
  if (p.n_times() < cfg.window_length)
    throw InsufficientDataError("data has " + std::to_string(p.n_times()) + " steps, window needs " +
                                std::to_string(cfg.window_length));
  const Index offset = p.n_times() - cfg.window_length;
  Window w{offset, p.slice_times(offset, cfg.window_length), Eigen::MatrixXd(p.n_farms(), 0), {}};
  for (Index h = 1; h <= cfg.horizon; ++h) w.horizon_times.push_back(p.times().back() + h * p.step_seconds());
  return w;
}

LatentGaussianModel window_model(const Window& w, ModelKind kind, const ExperimentConfig& cfg) {
  auto opts = cfg.assembly();
  const auto domain = kind == ModelKind::kT ? nullptr : make_domain(w.train.locations(), cfg);
  return assemble(kind, model_input(w, cfg.epsilon), domain, opts);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void add_common(CLI::App* sub, std::string& config, Overrides& o) {
  sub->add_option("-c,--config", config, "JSON config file (defaults apply when omitted)");
  sub->add_option("--jobs", o.jobs, "worker threads, 0 = all available");
  sub->add_option_function<std::uint64_t>(
      "--seed", [&o](std::uint64_t s) { o.seed = s, o.has_seed = true; }, "master seed");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probabilistic wind power forecasting with latent Gaussian space-time models", "stwind"};
  app.require_subcommand(1);
  std::string config, data, out_path, theta_path, in_path;
  Overrides o;

  auto* init = app.add_subcommand("init-config", "write the full default config");
  init->add_option("-o,--out", out_path, "output file (stdout when omitted)");

  auto* fit = app.add_subcommand("fit", "fit one model on the last window of the data");
  add_common(fit, config, o);
  fit->add_option("-d,--data", data, "portfolio CSV")->required();
  fit->add_option("-o,--out", out_path, "fit result JSON")->required();
  fit->add_option("--model", o.model, "T, S-T or ST+T");
  fit->add_option("--max-iter", o.max_iter, "optimizer iteration cap");

  auto* forecast = app.add_subcommand("forecast", "quantile forecasts per farm and aggregated");
  add_common(forecast, config, o);
  forecast->add_option("-d,--data", data, "portfolio CSV")->required();
  forecast->add_option("-t,--theta", theta_path, "fit result JSON")->required();
  forecast->add_option("-o,--out", out_path, "forecast CSV")->required();
  forecast->add_option("--model", o.model, "T, S-T or ST+T");
  forecast->add_option("--n-samples", o.n_samples, "predictive samples");

  auto* evaluate = app.add_subcommand("evaluate", "rolling-window evaluation");
  add_common(evaluate, config, o);
  evaluate->add_option("-d,--data", data, "portfolio CSV")->required();
  evaluate->add_option("-o,--out", out_path, "report directory")->required();
  evaluate->add_option("--model", o.model, "restrict to one model");
  evaluate->add_option("--n-samples", o.n_samples, "predictive samples");
  evaluate->add_option("--max-iter", o.max_iter, "optimizer iteration cap");

  auto* cv = app.add_subcommand("cv", "spatial k-fold cross-validation");
  add_common(cv, config, o);
  cv->add_option("-d,--data", data, "portfolio CSV")->required();
  cv->add_option("-o,--out", out_path, "report directory")->required();
  cv->add_option("--model", o.model, "restrict to one model");
  cv->add_option("--n-samples", o.n_samples, "predictive samples");
  cv->add_option("--max-iter", o.max_iter, "optimizer iteration cap");

  auto* simulate = app.add_subcommand("simulate", "simulation study on synthetic ST+T data");
  add_common(simulate, config, o);
  simulate->add_option("-o,--out", out_path, "report directory")->required();
  simulate->add_option("--model", o.model, "restrict to one model");
  simulate->add_option("--n-samples", o.n_samples, "predictive samples");
  simulate->add_option("--n-datasets", o.n_datasets, "number of simulated data sets");
  simulate->add_option("--max-iter", o.max_iter, "optimizer iteration cap");

  auto* report = app.add_subcommand("report", "print the summary of a report directory");
  report->add_option("-i,--in", in_path, "report directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (init->parsed()) {
      const auto text = config_to_json(ExperimentConfig{});
      if (out_path.empty()) out << text;
      else write_file_atomic(out_path, text);
      return 0;
    }
    if (report->parsed()) {
      out << summarize_report_dir(in_path);
      return 0;
    }
    const ExperimentConfig cfg = resolve_config(config, o);

    if (fit->parsed()) {
      const auto p = load_data(data, cfg);
      const ModelKind kind = cfg.models.front();
      const auto model = window_model(last_window(p, cfg), kind, cfg);
      auto result = fit_map(model, initial_hyperparameters(model), cfg.fit);
      result.seed = cfg.master_seed;
      write_file_atomic(out_path, fit_result_to_json(result));
      if (!result.converged) {
        err << "warning: " << to_string(kind) << " fit did not converge in " << result.iterations
            << " iterations; best point written\n";
        return 2;
      }
      return 0;
    }
    if (forecast->parsed()) {
      const auto p = load_data(data, cfg);
      const auto fitted = fit_result_from_json(read_file(theta_path));
      // An explicit or single configured model must match the theta file.
      const bool listed = std::find(cfg.models.begin(), cfg.models.end(), fitted.kind) != cfg.models.end();
      const ModelKind kind = (cfg.models.size() == 1 || !listed) ? cfg.models.front() : fitted.kind;
      if (fitted.kind != kind)
        throw ArgumentError("theta file is for model " + to_string(fitted.kind) + " but " + to_string(kind) +
                            " was selected");
      const Window w = last_window(p, cfg);
      const auto model = window_model(w, kind, cfg);
      const auto cube = predictive_samples(model, fitted.theta_hat, cfg.n_samples,
                                           derive_seed(cfg.master_seed, {0xF0CA57}));
      RowMatrix q_farm, q_agg;
      kernels::quantile_rows(cube.values, cfg.quantiles, q_farm, Execution::kParallel);
      const Eigen::VectorXd cap = p.capacities();
      kernels::quantile_rows(aggregate_samples(cube, std::span<const double>(cap.data(), cap.size())), cfg.quantiles,
                             q_agg, Execution::kParallel);
      std::ostringstream csv;
      csv << "target,h,time,level,value\n";
      char buf[64];
      auto emit = [&](const std::string& target, Index h, const RowMatrix& q, Index row) {
        for (std::size_t k = 0; k < cfg.quantiles.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%.4g,%.10g", cfg.quantiles[k], q(row, static_cast<Index>(k)));
          csv << target << ',' << h << ',' << format_rfc3339(w.horizon_times[static_cast<std::size_t>(h - 1)]) << ','
              << buf << '\n';
        }
      };
      for (Index j = 0; j < p.n_farms(); ++j)
        for (Index h = 1; h <= cfg.horizon; ++h) emit(p.farms()[static_cast<std::size_t>(j)].id, h, q_farm, j * cfg.horizon + h - 1);
      for (Index h = 1; h <= cfg.horizon; ++h) emit("aggregate", h, q_agg, h - 1);
      write_file_atomic(out_path, csv.str());
      return 0;
    }
    if (evaluate->parsed()) {
      const auto p = load_data(data, cfg);
      write_report(run_rolling_eval(p, cfg), out_path);
      return 0;
    }
    if (cv->parsed()) {
      const auto p = load_data(data, cfg);
      write_report(run_spatial_cv(p, cfg), out_path);
      return 0;
    }
    if (simulate->parsed()) {
      const auto datasets = simulate_datasets(cfg);
      if (cfg.simulation.t_steps < cfg.window_length + cfg.horizon)
        throw ArgumentError("simulated series shorter than one window (L + H)");
      const auto rep = run_rolling_eval(datasets, cfg, "simulation");
      write_report(rep, out_path, [&](const fs::path& dir) {
        fs::create_directories(dir / "datasets");
        char name[64];
        for (std::size_t d = 0; d < datasets.size(); ++d) {
          std::snprintf(name, sizeof name, "dataset_%03zu.csv", d);
          write_portfolio(datasets[d], dir / "datasets" / name);
        }
      });
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace stwind::cli
