#include "stwind/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "stwind/error.hpp"

namespace stwind {

using nlohmann::json;

namespace {

json theta_to_json(const Hyperparameters& th) {
  return {{"sigma_e2", th.sigma_e2}, {"sigma_nu2", th.sigma_nu2}, {"rho1", th.rho1},
          {"rho2", th.rho2},         {"sigma_w2", th.sigma_w2},   {"kappa", th.kappa}};
}

// Rejects keys outside `allowed`, reporting the full dotted path.
void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("'" + path + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown config key '" + (path.empty() ? key : path + "." + key) + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  std::vector<std::string> models;
  for (auto k : c.models) models.push_back(to_string(k));
  j["models"] = models;
  j["window_length"] = c.window_length;
  j["horizon"] = c.horizon;
  j["stride"] = c.stride;
  j["knot_spacing"] = c.knot_spacing;
  j["n_samples"] = c.n_samples;
  j["cv_folds"] = c.cv_folds;
  j["cv_blocked"] = c.cv_blocked;
  j["master_seed"] = c.master_seed;
  j["max_zero_fraction"] = c.max_zero_fraction;
  j["epsilon"] = c.epsilon;
  j["coordinates"] = c.coordinates == CoordinateSystem::kPlanarKm ? "planar_km" : "geographic_deg";
  j["mesh"] = {{"extension_factor", c.mesh.extension_factor},
               {"prior_range_km", c.mesh.prior_range_km},
               {"max_edge_inner_km", c.mesh.max_edge_inner_km ? json(*c.mesh.max_edge_inner_km) : json(nullptr)}};
  j["prior"] = {{"precision_shape", c.prior.precision_shape},
                {"precision_rate", c.prior.precision_rate},
                {"correlation_sd", c.prior.correlation_sd},
                {"intercept_variance", c.prior.intercept_variance}};
  j["fit"] = {{"max_iter", c.fit.max_iter}, {"tolerance", c.fit.tolerance}};
  j["quantiles"] = c.quantiles;
  j["reliability"] = {{"n_mc", c.reliability.n_mc}, {"band", c.reliability.band}};
  const auto& s = c.simulation;
  j["simulation"] = {{"n_datasets", s.n_datasets}, {"n_farms", s.n_farms},   {"t_steps", s.t_steps},
                     {"width_km", s.width_km},     {"height_km", s.height_km}, {"theta", theta_to_json(s.truth.theta)},
                     {"b0", s.truth.b0}};
  j["jobs"] = c.jobs;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    check_keys(j, "", {"models", "window_length", "horizon", "stride", "knot_spacing", "n_samples", "cv_folds",
                       "cv_blocked", "master_seed", "max_zero_fraction", "epsilon", "coordinates", "mesh", "prior",
                       "fit", "quantiles", "reliability", "simulation", "jobs"});
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    read(j, "window_length", c.window_length);
    read(j, "horizon", c.horizon);
    read(j, "stride", c.stride);
    read(j, "knot_spacing", c.knot_spacing);
    read(j, "n_samples", c.n_samples);
    read(j, "cv_folds", c.cv_folds);
    read(j, "cv_blocked", c.cv_blocked);
    read(j, "master_seed", c.master_seed);
    read(j, "max_zero_fraction", c.max_zero_fraction);
    read(j, "epsilon", c.epsilon);
    read(j, "jobs", c.jobs);
    read(j, "quantiles", c.quantiles);
    if (j.contains("coordinates")) {
      const auto s = j.at("coordinates").get<std::string>();
      if (s == "planar_km") c.coordinates = CoordinateSystem::kPlanarKm;
      else if (s == "geographic_deg") c.coordinates = CoordinateSystem::kGeographicDeg;
      else throw ConfigError("coordinates must be 'planar_km' or 'geographic_deg'");
    }
    if (j.contains("mesh")) {
      const auto& m = j.at("mesh");
      check_keys(m, "mesh", {"extension_factor", "prior_range_km", "max_edge_inner_km"});
      read(m, "extension_factor", c.mesh.extension_factor);
      read(m, "prior_range_km", c.mesh.prior_range_km);
      if (m.contains("max_edge_inner_km") && !m.at("max_edge_inner_km").is_null())
        c.mesh.max_edge_inner_km = m.at("max_edge_inner_km").get<double>();
    }
    if (j.contains("prior")) {
      const auto& p = j.at("prior");
      check_keys(p, "prior", {"precision_shape", "precision_rate", "correlation_sd", "intercept_variance"});
      read(p, "precision_shape", c.prior.precision_shape);
      read(p, "precision_rate", c.prior.precision_rate);
      read(p, "correlation_sd", c.prior.correlation_sd);
      read(p, "intercept_variance", c.prior.intercept_variance);
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      check_keys(f, "fit", {"max_iter", "tolerance"});
      read(f, "max_iter", c.fit.max_iter);
      read(f, "tolerance", c.fit.tolerance);
    }
    if (j.contains("reliability")) {
      const auto& r = j.at("reliability");
      check_keys(r, "reliability", {"n_mc", "band"});
      read(r, "n_mc", c.reliability.n_mc);
      read(r, "band", c.reliability.band);
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      check_keys(s, "simulation", {"n_datasets", "n_farms", "t_steps", "width_km", "height_km", "theta", "b0"});
      read(s, "n_datasets", c.simulation.n_datasets);
      read(s, "n_farms", c.simulation.n_farms);
      read(s, "t_steps", c.simulation.t_steps);
      read(s, "width_km", c.simulation.width_km);
      read(s, "height_km", c.simulation.height_km);
      read(s, "b0", c.simulation.truth.b0);
      if (s.contains("theta")) {
        const auto& t = s.at("theta");
        check_keys(t, "simulation.theta", {"sigma_e2", "sigma_nu2", "rho1", "rho2", "sigma_w2", "kappa"});
        auto& th = c.simulation.truth.theta;
        read(t, "sigma_e2", th.sigma_e2);
        read(t, "sigma_nu2", th.sigma_nu2);
        read(t, "rho1", th.rho1);
        read(t, "rho2", th.rho2);
        read(t, "sigma_w2", th.sigma_w2);
        read(t, "kappa", th.kappa);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  if (c.window_length < 2 || c.horizon < 1 || c.stride < 1 || c.knot_spacing < 1)
    throw ConfigError("window_length >= 2, horizon >= 1, stride >= 1 and knot_spacing >= 1 required");
  if (c.n_samples < 2) throw ConfigError("n_samples must be at least 2");
  if (!(c.max_zero_fraction >= 0.0 && c.max_zero_fraction <= 1.0)) throw ConfigError("max_zero_fraction must lie in [0, 1]");
  if (!(c.epsilon > 0.0 && c.epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
  for (double q : c.quantiles)
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantiles must lie in (0, 1)");
  if (c.fit.max_iter < 1) throw ConfigError("fit.max_iter must be positive");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace stwind
