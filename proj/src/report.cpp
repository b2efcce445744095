#include "stwind/report.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "stwind/config.hpp"
#include "stwind/error.hpp"

namespace stwind {

namespace fs = std::filesystem;

namespace {

fs::path temp_sibling(const fs::path& out) {
  std::random_device rd;
  char tag[32];
  std::snprintf(tag, sizeof tag, ".tmp-%08x", rd());
  const fs::path parent = out.has_parent_path() ? out.parent_path() : fs::path(".");
  return parent / (out.filename().string() + tag);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed for " + path.string());
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr Index kHighlighted[] = {1, 7, 13, 19};

}  // namespace

void write_directory_atomic(const fs::path& out, const std::function<void(const fs::path&)>& fill) {
  const fs::path tmp = temp_sibling(out);
  fs::create_directories(tmp);
  try {
    fill(tmp);
    if (fs::exists(out)) fs::remove_all(out);
    fs::rename(tmp, out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

void write_file_atomic(const fs::path& out, const std::string& content) {
  const fs::path tmp = temp_sibling(out);
  try {
    write_text(tmp, content);
    fs::rename(tmp, out);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

std::string summary_markdown(const VerificationReport& r) {
  std::ostringstream s;
  const auto& cfg = r.config;
  s << "# Verification report: " << r.scenario << "\n\n";
  s << "- master seed: " << cfg.master_seed << "\n";
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  s << "- config hash: " << hash << "\n";
  s << "- window L = " << cfg.window_length << ", horizon H = " << cfg.horizon << ", samples = " << cfg.n_samples
    << "\n";
  s << "- hyperparameters are MAP estimates; predictive intervals leave out hyperparameter uncertainty\n";
  s << "- hyperprior settings (log-Gamma shape " << num(cfg.prior.precision_shape) << ", rate "
    << num(cfg.prior.precision_rate) << "; intercept variance " << num(cfg.prior.intercept_variance)
    << ") are working assumptions\n\n";

  s << "## Fits\n\n| model | units | failed | not converged |\n|---|---|---|---|\n";
  for (const auto& m : r.models) {
    Index units = 0, nc = 0;
    for (const auto& f : r.fits)
      if (f.kind == m.kind) {
        ++units;
        if (f.ok && !f.fit.converged) ++nc;
      }
    s << "| " << to_string(m.kind) << " | " << units << " | " << m.failures << " | " << nc << " |\n";
  }

  for (Scope scope : {Scope::kIndividual, Scope::kAggregated}) {
    s << "\n## " << (scope == Scope::kIndividual ? "Individual" : "Aggregated")
      << " scores (% of nominal power)\n\n| model | h | RMSE | CRPS | coverage 5% | bars 5% |\n|---|---|---|---|---|---|\n";
    for (const auto& m : r.models) {
      const auto t = m.scores.table(to_string(m.kind), scope);
      const auto d = r.diagram(m.kind, scope);
      for (Index h : kHighlighted) {
        if (h > static_cast<Index>(t.rows.size())) continue;
        const auto& row = t.rows[static_cast<std::size_t>(h - 1)];
        s << "| " << to_string(m.kind) << " | " << h << " | " << fixed(row.rmse_pct) << " | " << fixed(row.crps_pct)
          << " | " << fixed(d.coverage(h, 0), 3) << " | [" << fixed(d.bar_lower(h - 1, 0), 3) << ", "
          << fixed(d.bar_upper(h - 1, 0), 3) << "] |\n";
      }
    }
  }

  bool any_spatial = false;
  for (const auto& m : r.models) any_spatial |= m.kind != ModelKind::kT;
  if (any_spatial) {
    s << "\n## Estimated range (km)\n\n| model | n | q25 | median | q75 |\n|---|---|---|---|---|\n";
    for (const auto& m : r.models) {
      if (m.kind == ModelKind::kT) continue;
      const auto q = r.ranges(m.kind);
      s << "| " << to_string(m.kind) << " | " << q.n << " | " << fixed(q.q25, 1) << " | " << fixed(q.median, 1)
        << " | " << fixed(q.q75, 1) << " |\n";
    }
  }
  return s.str();
}

void write_report(const VerificationReport& r, const fs::path& out, const std::function<void(const fs::path&)>& extra) {
  write_directory_atomic(out, [&](const fs::path& dir) {
    write_text(dir / "config.json", config_to_json(r.config));

    nlohmann::json manifest;
    manifest["scenario"] = r.scenario;
    manifest["master_seed"] = r.config.master_seed;
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(r.config)));
    manifest["config_hash"] = hash;
    manifest["estimation"] = "MAP hyperparameters, exact Gaussian latent posterior";
    manifest["files"] = {"config.json", "scores.csv", "reliability.json", "fits.csv", "ranges.csv", "summary.md"};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    std::ostringstream scores;
    const auto tables = r.tables();
    write_scores_csv(tables, scores);
    write_text(dir / "scores.csv", scores.str());

    auto rel = nlohmann::json::array();
    for (Scope scope : {Scope::kIndividual, Scope::kAggregated})
      for (const auto& m : r.models)
        rel.push_back(nlohmann::json::parse(reliability_to_json(r.diagram(m.kind, scope), to_string(m.kind), scope)));
    write_text(dir / "reliability.json", rel.dump(2) + "\n");

    std::ostringstream fits;
    fits << "scenario,dataset,window,fold,model,seed,status,converged,iterations,log_posterior,sigma_e2,sigma_nu2,"
            "rho1,rho2,sigma_w2,kappa,range_km,error\n";
    for (const auto& f : r.fits) {
      const auto& th = f.fit.theta_hat;
      const bool ar = f.kind != ModelKind::kST, field = f.kind != ModelKind::kT;
      fits << f.scenario << ',' << f.dataset << ',' << f.window << ',' << f.fold << ',' << to_string(f.kind) << ','
           << f.seed << ',' << (f.ok ? "ok" : "failed") << ',' << (f.ok && f.fit.converged ? "true" : "false") << ',';
      if (f.ok) {
        fits << f.fit.iterations << ',' << num(f.fit.log_posterior_at_mode) << ',' << num(th.sigma_e2) << ','
             << (ar ? num(th.sigma_nu2) : "") << ',' << (ar ? num(th.rho1) : "") << ','
             << (field ? num(th.rho2) : "") << ',' << (field ? num(th.sigma_w2) : "") << ','
             << (field ? num(th.kappa) : "") << ',' << (field ? num(th.range()) : "") << ",\n";
      } else {
        std::string msg = f.error;
        for (auto& ch : msg)
          if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
        fits << ",,,,,,,,," << msg << '\n';
      }
    }
    write_text(dir / "fits.csv", fits.str());

    std::ostringstream ranges;
    ranges << "model,n,q25,median,q75,iqr\n";
    for (const auto& m : r.models) {
      if (m.kind == ModelKind::kT) continue;
      const auto q = r.ranges(m.kind);
      ranges << to_string(m.kind) << ',' << q.n << ',' << num(q.q25) << ',' << num(q.median) << ',' << num(q.q75)
             << ',' << num(q.iqr()) << '\n';
    }
    write_text(dir / "ranges.csv", ranges.str());

    write_text(dir / "summary.md", summary_markdown(r));
    if (extra) extra(dir);
  });
}

std::string summarize_report_dir(const fs::path& dir) {
  auto slurp = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw Error("report directory lacks " + std::string(name));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto manifest = nlohmann::json::parse(slurp("manifest.json"));
  std::ostringstream s;
  s << "# " << manifest.at("scenario").get<std::string>() << " (seed " << manifest.at("master_seed").get<std::uint64_t>()
    << ", config " << manifest.at("config_hash").get<std::string>() << ")\n\n";
  s << "| scope | model | h | RMSE % | CRPS % |\n|---|---|---|---|---|\n";
  std::istringstream scores(slurp("scores.csv"));
  std::string line;
  std::getline(scores, line);
  while (std::getline(scores, line)) {
    std::istringstream row(line);
    std::string scope, model, h, rmse, crps;
    std::getline(row, scope, ',');
    std::getline(row, model, ',');
    std::getline(row, h, ',');
    std::getline(row, rmse, ',');
    std::getline(row, crps, ',');
    const int hv = std::stoi(h);
    if (hv == 1 || hv == 7 || hv == 13 || hv == 19)
      s << "| " << scope << " | " << model << " | " << h << " | " << fixed(std::stod(rmse)) << " | "
        << fixed(std::stod(crps)) << " |\n";
  }
  s << "\n" << slurp("ranges.csv");
  return s.str();
}

}  // namespace stwind
