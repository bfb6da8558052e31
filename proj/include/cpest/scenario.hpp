#pragma once

#include <json.hpp>

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "cpest/estimator.hpp"
#include "cpest/parameter_maps.hpp"
#include "cpest/plant.hpp"
#include "cpest/power_curve.hpp"

namespace cpest {

using Json = nlohmann::ordered_json;

/// Thrown for malformed or out-of-range configuration input; the CLI maps it
/// to its configuration-error exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"S1", "S1-noise", "S1-smallTe", "S2",
                                             "baseline-overparam"};
  return names;
}

struct IntegrationSpec {
  double h = 1e-3;
  double t_f = 500.0;
  double stride = 0.1;

  void validate() const {
    if (!(h > 0)) throw ConfigError("integration.h must be positive");
    if (!(t_f >= 0)) throw ConfigError("integration.t_f must be nonnegative");
    if (!(stride > 0)) throw ConfigError("integration.stride must be positive");
    double ratio = stride / h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
      throw ConfigError("integration.stride must be an integer multiple of h");
  }
};

/// Box of admissible curve parameters used to size the selector gain alpha.
struct PriorBox {
  double c1_min = 40.0;
  double c2_min = 0.1;
  double c3_max = 12.0;

  void validate() const {
    if (!(c1_min > 0 && c2_min > 0 && c3_max > 0))
      throw ConfigError("prior bounds must be positive");
  }
};

struct Eta0Spec {
  enum class Mode { kScale, kExplicit };
  Mode mode = Mode::kScale;
  double scale = 0.5;
  Vec3 values = Vec3::Zero();

  void validate() const {
    if (mode == Mode::kScale) {
      if (!(scale > 0)) throw ConfigError("eta0.scale must be positive");
    } else {
      if (!(values.minCoeff() > 0)) throw ConfigError("eta0.values must be positive");
    }
  }
};

/// Complete description of one experiment. Parsing starts from the scenario's
/// preset and layers the file's explicit keys on top.
struct ScenarioConfig {
  std::string scenario = "S1";
  double rho = 1.225;
  double blade_length = 1.84;
  double inertia = 7.856;
  bool curve_direct = false;       ///< false: collapse the kappa table; true: c given directly
  HeierCoefficients kappas;
  CpParams direct_c;
  WindProfile wind;
  TorqueProfile torque;
  double omega0 = 10.0;
  double sigma = 1.0;
  NoiseSpec noise;
  double gamma_w = 100.0;
  double f0 = 1.0;
  Vec3 gamma_diag{50.0, 50.0, 500.0};
  double alpha = 0.0;              ///< 0 requests the automatic prior-box value
  double eta_floor = 1e-8;
  PriorBox prior;
  Eta0Spec eta0;
  IntegrationSpec integration;
  std::string output_dir;

  bool wind_scaled() const { return scenario != "S2"; }
  bool mixing_enabled() const { return scenario != "baseline-overparam"; }

  PhysicalParams physical() const {
    return PhysicalParams::from_rho_r_inertia(rho, blade_length, inertia);
  }

  CpParams true_c() const {
    CpParams c = curve_direct ? direct_c : c_from_kappas(kappas, blade_length);
    c.validate();
    return c;
  }

  /// Worst admissible curve in the prior box for the alpha bound.
  CpParams prior_corner() const {
    return CpParams{prior.c1_min, prior.c2_min, prior.c3_max};
  }

  double resolved_alpha() const {
    if (alpha > 0) return alpha;
    return 2.0 * alpha_lower_bound_physical(prior_corner(), physical(), wind.base, omega0,
                                            wind_scaled());
  }

  EstimatorGains estimator_gains() const {
    EstimatorGains g;
    g.gamma_w = gamma_w;
    g.f0 = f0;
    g.gamma = gamma_diag.asDiagonal();
    g.alpha = resolved_alpha();
    g.eta_floor = eta_floor;
    g.validate();
    return g;
  }

  Vec3 initial_eta(const Vec3& eta_true) const {
    Vec3 e0 = (eta0.mode == Eta0Spec::Mode::kScale) ? Vec3(eta0.scale * eta_true) : eta0.values;
    return e0.cwiseMax(eta_floor);
  }

  void validate() const {
    bool known = false;
    for (const auto& n : scenario_names()) known = known || n == scenario;
    if (!known) throw ConfigError("unknown scenario '" + scenario + "'");
    if (!(rho > 0 && blade_length > 0 && inertia > 0))
      throw ConfigError("physical parameters must be positive");
    if (curve_direct)
      direct_c.validate();
    else
      kappas.validate();
    wind.validate();
    noise.validate();
    if (!(omega0 > 0)) throw ConfigError("omega0 must be positive");
    if (!(sigma > 0)) throw ConfigError("sigma must be positive");
    if (!(gamma_w > 0 && f0 > 0)) throw ConfigError("gains.gamma_w and gains.f0 must be positive");
    if (!(gamma_diag.minCoeff() > 0)) throw ConfigError("gains.gamma entries must be positive");
    if (!(alpha >= 0)) throw ConfigError("gains.alpha must be nonnegative (0 = automatic)");
    if (!(eta_floor > 0)) throw ConfigError("gains.eta_floor must be positive");
    prior.validate();
    eta0.validate();
    integration.validate();
    if (torque.kind == TorqueProfile::Kind::kConstant && torque.magnitude < 0)
      throw ConfigError("torque.magnitude must be nonnegative");
  }
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline void read_num(const Json& j, const std::string& where, const char* key, double& target) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  target = v.get<double>();
}

inline void read_bool(const Json& j, const std::string& where, const char* key, bool& target) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
  target = v.get<bool>();
}

inline void read_u64(const Json& j, const std::string& where, const char* key,
                     std::uint64_t& target) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError(where + "." + key + " must be an integer");
  target = v.get<std::uint64_t>();
}

inline std::string read_str(const Json& j, const std::string& where, const char* key,
                            const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

/// Preset configuration for a named scenario.
inline ScenarioConfig default_config(const std::string& scenario) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  if (scenario == "S1" || scenario == "baseline-overparam") {
    // defaults as constructed
  } else if (scenario == "S1-noise") {
    cfg.noise.wind_amplitude = 0.3;
    cfg.noise.rotor_amplitude = 0.5;
  } else if (scenario == "S1-smallTe") {
    cfg.torque.kind = TorqueProfile::Kind::kConstant;
    cfg.torque.magnitude = 0.01 * cfg.inertia;
  } else if (scenario == "S2") {
    cfg.wind.kind = WindProfile::Kind::kSinusoid;
    cfg.wind.base = 9.0;
    cfg.wind.amplitude = 0.5;
    cfg.wind.frequency = 0.2;
    cfg.torque.kind = TorqueProfile::Kind::kWindCoupled;
  } else {
    throw ConfigError("unknown scenario '" + scenario + "'");
  }
  return cfg;
}

/// Parse and validate a configuration document. Unknown keys anywhere are
/// rejected; keys absent from the document keep the scenario preset's values.
inline ScenarioConfig parse_config(const Json& j) {
  using detail::check_keys;
  using detail::read_bool;
  using detail::read_num;
  using detail::read_str;
  using detail::read_u64;

  check_keys(j, "config",
             {"schema_version", "scenario", "physical", "curve", "wind", "torque", "omega0",
              "sigma", "noise", "gains", "prior", "eta0", "integration", "output_dir"});
  if (!j.contains("schema_version"))
    throw ConfigError("config.schema_version is required");
  if (!j.at("schema_version").is_number_integer() ||
      j.at("schema_version").get<int>() != kSchemaVersion)
    throw ConfigError("config.schema_version must be " + std::to_string(kSchemaVersion));

  ScenarioConfig cfg = default_config(read_str(j, "config", "scenario", "S1"));

  if (j.contains("physical")) {
    const Json& p = j.at("physical");
    check_keys(p, "physical", {"rho", "blade_length", "inertia"});
    read_num(p, "physical", "rho", cfg.rho);
    read_num(p, "physical", "blade_length", cfg.blade_length);
    read_num(p, "physical", "inertia", cfg.inertia);
  }

  if (j.contains("curve")) {
    const Json& cv = j.at("curve");
    std::string mode = read_str(cv, "curve", "mode", "kappa");
    if (mode == "kappa") {
      check_keys(cv, "curve",
                 {"mode", "kappa1", "kappa2", "kappa3", "kappa4", "kappa5", "kappa6", "kappa7",
                  "ell", "beta_in_degrees"});
      cfg.curve_direct = false;
      read_num(cv, "curve", "kappa1", cfg.kappas.kappa1);
      read_num(cv, "curve", "kappa2", cfg.kappas.kappa2);
      read_num(cv, "curve", "kappa3", cfg.kappas.kappa3);
      read_num(cv, "curve", "kappa4", cfg.kappas.kappa4);
      read_num(cv, "curve", "kappa5", cfg.kappas.kappa5);
      read_num(cv, "curve", "kappa6", cfg.kappas.kappa6);
      read_num(cv, "curve", "kappa7", cfg.kappas.kappa7);
      read_num(cv, "curve", "ell", cfg.kappas.ell);
      read_bool(cv, "curve", "beta_in_degrees", cfg.kappas.beta_in_degrees);
    } else if (mode == "direct") {
      check_keys(cv, "curve", {"mode", "c1", "c2", "c3"});
      cfg.curve_direct = true;
      cfg.direct_c = c_from_kappas(cfg.kappas, cfg.blade_length);
      read_num(cv, "curve", "c1", cfg.direct_c.c1);
      read_num(cv, "curve", "c2", cfg.direct_c.c2);
      read_num(cv, "curve", "c3", cfg.direct_c.c3);
    } else {
      throw ConfigError("curve.mode must be 'kappa' or 'direct'");
    }
  }

  if (j.contains("wind")) {
    const Json& w = j.at("wind");
    check_keys(w, "wind",
               {"kind", "base", "amplitude", "frequency", "ramp_start", "ramp_duration"});
    if (w.contains("kind")) {
      std::string kind = read_str(w, "wind", "kind", "constant");
      if (kind == "constant")
        cfg.wind.kind = WindProfile::Kind::kConstant;
      else if (kind == "piecewise")
        cfg.wind.kind = WindProfile::Kind::kRampHold;
      else if (kind == "sinusoidal-perturbed")
        cfg.wind.kind = WindProfile::Kind::kSinusoid;
      else
        throw ConfigError("wind.kind must be constant, piecewise, or sinusoidal-perturbed");
    }
    read_num(w, "wind", "base", cfg.wind.base);
    read_num(w, "wind", "amplitude", cfg.wind.amplitude);
    read_num(w, "wind", "frequency", cfg.wind.frequency);
    read_num(w, "wind", "ramp_start", cfg.wind.ramp_start);
    read_num(w, "wind", "ramp_duration", cfg.wind.ramp_duration);
  }

  if (j.contains("torque")) {
    const Json& tq = j.at("torque");
    check_keys(tq, "torque", {"kind", "magnitude"});
    if (tq.contains("kind")) {
      std::string kind = read_str(tq, "torque", "kind", "zero");
      if (kind == "zero")
        cfg.torque.kind = TorqueProfile::Kind::kZero;
      else if (kind == "wind-coupled")
        cfg.torque.kind = TorqueProfile::Kind::kWindCoupled;
      else if (kind == "small-constant")
        cfg.torque.kind = TorqueProfile::Kind::kConstant;
      else
        throw ConfigError("torque.kind must be zero, wind-coupled, or small-constant");
    }
    read_num(tq, "torque", "magnitude", cfg.torque.magnitude);
  }

  read_num(j, "config", "omega0", cfg.omega0);
  read_num(j, "config", "sigma", cfg.sigma);

  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    check_keys(n, "noise", {"wind_amplitude", "rotor_amplitude", "seed"});
    read_num(n, "noise", "wind_amplitude", cfg.noise.wind_amplitude);
    read_num(n, "noise", "rotor_amplitude", cfg.noise.rotor_amplitude);
    read_u64(n, "noise", "seed", cfg.noise.seed);
  }

  if (j.contains("gains")) {
    const Json& g = j.at("gains");
    check_keys(g, "gains", {"gamma_w", "f0", "gamma", "alpha", "eta_floor"});
    read_num(g, "gains", "gamma_w", cfg.gamma_w);
    read_num(g, "gains", "f0", cfg.f0);
    if (g.contains("gamma")) {
      const Json& gm = g.at("gamma");
      if (!gm.is_array() || gm.size() != 3)
        throw ConfigError("gains.gamma must be an array of 3 numbers");
      for (int i = 0; i < 3; ++i) {
        if (!gm[i].is_number()) throw ConfigError("gains.gamma entries must be numbers");
        cfg.gamma_diag[i] = gm[i].get<double>();
      }
    }
    read_num(g, "gains", "alpha", cfg.alpha);
    read_num(g, "gains", "eta_floor", cfg.eta_floor);
  }

  if (j.contains("prior")) {
    const Json& p = j.at("prior");
    check_keys(p, "prior", {"c1_min", "c2_min", "c3_max"});
    read_num(p, "prior", "c1_min", cfg.prior.c1_min);
    read_num(p, "prior", "c2_min", cfg.prior.c2_min);
    read_num(p, "prior", "c3_max", cfg.prior.c3_max);
  }

  if (j.contains("eta0")) {
    const Json& e = j.at("eta0");
    check_keys(e, "eta0", {"mode", "scale", "values"});
    std::string mode = read_str(e, "eta0", "mode", "scale");
    if (mode == "scale")
      cfg.eta0.mode = Eta0Spec::Mode::kScale;
    else if (mode == "explicit")
      cfg.eta0.mode = Eta0Spec::Mode::kExplicit;
    else
      throw ConfigError("eta0.mode must be 'scale' or 'explicit'");
    read_num(e, "eta0", "scale", cfg.eta0.scale);
    if (e.contains("values")) {
      const Json& vals = e.at("values");
      if (!vals.is_array() || vals.size() != 3)
        throw ConfigError("eta0.values must be an array of 3 numbers");
      for (int i = 0; i < 3; ++i) {
        if (!vals[i].is_number()) throw ConfigError("eta0.values entries must be numbers");
        cfg.eta0.values[i] = vals[i].get<double>();
      }
    } else if (cfg.eta0.mode == Eta0Spec::Mode::kExplicit) {
      throw ConfigError("eta0.values is required in explicit mode");
    }
  }

  if (j.contains("integration")) {
    const Json& it = j.at("integration");
    check_keys(it, "integration", {"h", "t_f", "stride"});
    read_num(it, "integration", "h", cfg.integration.h);
    read_num(it, "integration", "t_f", cfg.integration.t_f);
    read_num(it, "integration", "stride", cfg.integration.stride);
  }

  cfg.output_dir = read_str(j, "config", "output_dir", cfg.output_dir);

  cfg.validate();
  return cfg;
}

inline const char* wind_kind_name(WindProfile::Kind k) {
  switch (k) {
    case WindProfile::Kind::kConstant: return "constant";
    case WindProfile::Kind::kRampHold: return "piecewise";
    case WindProfile::Kind::kSinusoid: return "sinusoidal-perturbed";
  }
  return "constant";
}

inline const char* torque_kind_name(TorqueProfile::Kind k) {
  switch (k) {
    case TorqueProfile::Kind::kZero: return "zero";
    case TorqueProfile::Kind::kWindCoupled: return "wind-coupled";
    case TorqueProfile::Kind::kConstant: return "small-constant";
  }
  return "zero";
}

/// Serialize a configuration to its document form; parse_config round-trips it.
inline Json config_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = cfg.scenario;
  j["physical"] = {{"rho", cfg.rho}, {"blade_length", cfg.blade_length},
                   {"inertia", cfg.inertia}};
  if (cfg.curve_direct) {
    j["curve"] = {{"mode", "direct"},
                  {"c1", cfg.direct_c.c1},
                  {"c2", cfg.direct_c.c2},
                  {"c3", cfg.direct_c.c3}};
  } else {
    j["curve"] = {{"mode", "kappa"},          {"kappa1", cfg.kappas.kappa1},
                  {"kappa2", cfg.kappas.kappa2}, {"kappa3", cfg.kappas.kappa3},
                  {"kappa4", cfg.kappas.kappa4}, {"kappa5", cfg.kappas.kappa5},
                  {"kappa6", cfg.kappas.kappa6}, {"kappa7", cfg.kappas.kappa7},
                  {"ell", cfg.kappas.ell},       {"beta_in_degrees", cfg.kappas.beta_in_degrees}};
  }
  j["wind"] = {{"kind", wind_kind_name(cfg.wind.kind)},
               {"base", cfg.wind.base},
               {"amplitude", cfg.wind.amplitude},
               {"frequency", cfg.wind.frequency},
               {"ramp_start", cfg.wind.ramp_start},
               {"ramp_duration", cfg.wind.ramp_duration}};
  j["torque"] = {{"kind", torque_kind_name(cfg.torque.kind)},
                 {"magnitude", cfg.torque.magnitude}};
  j["omega0"] = cfg.omega0;
  j["sigma"] = cfg.sigma;
  j["noise"] = {{"wind_amplitude", cfg.noise.wind_amplitude},
                {"rotor_amplitude", cfg.noise.rotor_amplitude},
                {"seed", cfg.noise.seed}};
  j["gains"] = {{"gamma_w", cfg.gamma_w},
                {"f0", cfg.f0},
                {"gamma", {cfg.gamma_diag[0], cfg.gamma_diag[1], cfg.gamma_diag[2]}},
                {"alpha", cfg.alpha},
                {"eta_floor", cfg.eta_floor}};
  j["prior"] = {{"c1_min", cfg.prior.c1_min},
                {"c2_min", cfg.prior.c2_min},
                {"c3_max", cfg.prior.c3_max}};
  j["eta0"] = {{"mode", cfg.eta0.mode == Eta0Spec::Mode::kScale ? "scale" : "explicit"},
               {"scale", cfg.eta0.scale},
               {"values", {cfg.eta0.values[0], cfg.eta0.values[1], cfg.eta0.values[2]}}};
  j["integration"] = {{"h", cfg.integration.h},
                      {"t_f", cfg.integration.t_f},
                      {"stride", cfg.integration.stride}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

/// Apply one "dotted.path=value" override onto a configuration document.
/// The value parses as JSON when possible and as a bare string otherwise.
inline void apply_override(Json& j, const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must have the form key.path=value: '" + spec + "'");
  std::string path = spec.substr(0, eq);
  std::string raw = spec.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* node = &j;
  size_t pos = 0;
  while (true) {
    size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError("override path has an empty segment: '" + spec + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = Json::object();
    node = &(*node)[key];
    pos = dot + 1;
  }
}

}  // namespace cpest
