#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cpest/csv.hpp"
#include "cpest/pipeline.hpp"
#include "cpest/scenario.hpp"

namespace cpest {

/// Least-squares line through (t, log|eta error|) after the mixing signal has
/// reached 10% of its final value. A strongly negative slope with high R^2 is
/// the numerical signature of exponential convergence.
struct SlopeFit {
  double slope = 0;
  double r2 = 0;
  double t_start = 0;
  long n = 0;
};

inline SlopeFit fit_log_error_slope(const std::vector<RunRecord>& records) {
  SlopeFit fit;
  if (records.empty()) return fit;
  double delta_final = records.back().Delta;
  double threshold = 0.1 * delta_final;
  size_t start = records.size();
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].Delta >= threshold) {
      start = i;
      break;
    }
  }
  if (start >= records.size()) return fit;
  fit.t_start = records[start].t;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<std::pair<double, double>> pts;
  for (size_t i = start; i < records.size(); ++i) {
    if (records[i].eta_err <= 0) continue;
    double x = records[i].t, y = std::log(records[i].eta_err);
    pts.emplace_back(x, y);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.n = static_cast<long>(pts.size());
  if (fit.n < 3) return fit;
  double n = static_cast<double>(fit.n);
  double denom = n * sxx - sx * sx;
  if (denom <= 0) return fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0, mean_y = sy / n;
  for (auto& [x, y] : pts) {
    double pred = intercept + fit.slope * x;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - mean_y) * (y - mean_y);
  }
  fit.r2 = (ss_tot > 1e-30) ? 1.0 - ss_res / ss_tot : 0.0;
  return fit;
}

inline void write_run_csv(const PipelineResult& result, const std::string& path) {
  CsvWriter csv(path,
                {"t",        "z",        "omega",    "y1",        "y2",       "Delta",
                 "lambda_min_F", "lambda_max_F", "eta_hat_1", "eta_hat_2", "eta_hat_3",
                 "c_hat_1",  "c_hat_2",  "c_hat_3",  "e_tilde_1", "e_tilde_2", "e_tilde_3",
                 "zdot",     "v_w",      "te",       "xi1",       "xi2",      "W_hat_1",
                 "W_hat_2",  "W_hat_3",  "W_hat_4",  "W_err",     "eta_err",  "nlpre_resid",
                 "key_id_resid", "u_lyap", "substeps"});
  for (const RunRecord& r : result.records) {
    double row[] = {r.t,          r.z,          r.omega,      r.y1,
                    r.y2,         r.Delta,      r.lambda_min_F, r.lambda_max_F,
                    r.eta_hat[0], r.eta_hat[1], r.eta_hat[2],  r.c_hat[0],
                    r.c_hat[1],   r.c_hat[2],   r.e_tilde[0],  r.e_tilde[1],
                    r.e_tilde[2], r.zdot,       r.v_w,         r.te,
                    r.xi1,        r.xi2,        r.W_hat[0],    r.W_hat[1],
                    r.W_hat[2],   r.W_hat[3],   r.W_err,       r.eta_err,
                    r.nlpre_resid, r.key_id_resid, r.u_lyap,
                    static_cast<double>(r.substeps)};
    csv.row(row);
  }
  csv.close();
}

/// Sampled comparison of the true curve, the final estimate, and optionally
/// the initial estimate, over a positive z grid.
inline void emit_cp_curve(const CpParams& c_true, const CpParams& c_est,
                          const CpParams* c_init, double z_lo, double z_hi, int n,
                          const std::string& path) {
  require(z_lo > 0 && z_hi >= z_lo && n >= 1, "emit_cp_curve: bad grid");
  std::vector<std::string> cols{"z", "Cp_true", "Cp_hat"};
  if (c_init) cols.push_back("Cp_init");
  CsvWriter csv(path, cols);
  for (int i = 0; i < n; ++i) {
    double z = (n == 1) ? z_lo : z_lo + (z_hi - z_lo) * static_cast<double>(i) / (n - 1);
    std::vector<double> row{z, cp_reduced(z, c_true), cp_reduced(z, c_est)};
    if (c_init) row.push_back(cp_reduced(z, *c_init));
    csv.row(row);
  }
  csv.close();
}

namespace detail {
inline Json vec_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }
inline Json vec_json(const Vec4& v) { return Json::array({v[0], v[1], v[2], v[3]}); }
}  // namespace detail

/// Deterministic run digest; excludes wall-clock quantities so seeded runs
/// serialize identically.
inline Json make_summary(const ScenarioConfig& cfg, const PipelineResult& result) {
  Json s;
  s["scenario"] = cfg.scenario;
  s["aborted"] = result.aborted;
  s["abort_reason"] = result.abort_reason;
  s["alpha"] = cfg.resolved_alpha();
  s["z0_drive"] = result.truth.z0_drive;
  s["truth"] = {{"c", detail::vec_json(Vec3{result.truth.c.c1, result.truth.c.c2,
                                            result.truth.c.c3})},
                {"theta", detail::vec_json(Vec3{result.truth.theta.theta1,
                                                result.truth.theta.theta2,
                                                result.truth.theta.theta3})},
                {"eta", detail::vec_json(result.truth.eta)},
                {"g", detail::vec_json(result.truth.g)},
                {"z_star", result.truth.z_star}};
  s["residual_sup"] = {{"nlpre", result.nlpre_max},
                       {"key_identity", result.key_identity_max},
                       {"wt_identity", result.wt_identity_max},
                       {"adj_identity", result.adj_identity_max}};
  s["max_substeps"] = result.max_substeps;
  if (result.records.empty()) {
    s["records"] = 0;
    return s;
  }
  const RunRecord& first = result.records.front();
  const RunRecord& last = result.records.back();
  s["records"] = result.records.size();
  s["initial"] = {{"lambda_max_F", first.lambda_max_F},
                  {"W_err", first.W_err},
                  {"eta_hat", detail::vec_json(first.eta_hat)},
                  {"c_hat", detail::vec_json(first.c_hat)}};
  s["final"] = {{"t", last.t},
                {"c_hat", detail::vec_json(last.c_hat)},
                {"e_tilde", detail::vec_json(last.e_tilde)},
                {"eta_hat", detail::vec_json(last.eta_hat)},
                {"Delta", last.Delta},
                {"lambda_min_F", last.lambda_min_F},
                {"lambda_max_F", last.lambda_max_F},
                {"W_err", last.W_err}};

  CpParams c_hat_final{last.c_hat[0], last.c_hat[1], last.c_hat[2]};
  double zs_hat = z_star(c_hat_final);
  s["z_star_hat"] = zs_hat;
  s["z_star_rel_error"] = std::abs(zs_hat - result.truth.z_star) / result.truth.z_star;

  double t08 = 0.8 * last.t;
  const RunRecord* at08 = &first;
  for (const RunRecord& r : result.records) {
    if (r.t <= t08) at08 = &r;
    else break;
  }
  double rel_gap = (last.Delta != 0)
                       ? std::abs(last.Delta - at08->Delta) / std::abs(last.Delta)
                       : 0.0;
  s["delta_tail"] = {{"at_08tf", at08->Delta}, {"final", last.Delta}, {"rel_gap", rel_gap}};

  double delta_drop = 0, lmax_rise = 0, u_rise = 0;
  double w_err_min = first.W_err;
  for (size_t i = 1; i < result.records.size(); ++i) {
    const RunRecord& a = result.records[i - 1];
    const RunRecord& b = result.records[i];
    delta_drop = std::max(delta_drop, a.Delta - b.Delta);
    lmax_rise = std::max(lmax_rise, b.lambda_max_F - a.lambda_max_F);
    u_rise = std::max(u_rise, b.u_lyap - a.u_lyap);
    w_err_min = std::min(w_err_min, b.W_err);
  }
  s["delta_max_drop"] = delta_drop;
  s["lambda_max_F_max_rise"] = lmax_rise;
  s["u_lyap_max_rise"] = u_rise;
  s["w_err_min_ratio"] = (first.W_err > 0) ? w_err_min / first.W_err : 0.0;

  SlopeFit fit = fit_log_error_slope(result.records);
  s["slope_fit"] = {{"slope", fit.slope}, {"r2", fit.r2}, {"t_start", fit.t_start},
                    {"n", fit.n}};

  bool converged = last.e_tilde.maxCoeff() < 1e-2;
  s["flags"] = {{"converged", converged},
                {"ls_error_halved", s["w_err_min_ratio"].get<double>() < 0.5},
                {"z_star_within_5pct", s["z_star_rel_error"].get<double>() < 0.05}};
  return s;
}

/// Root directory for outputs: explicit flag, then the CPEST_OUT_ROOT
/// environment variable, then ./out.
inline std::string resolve_out_root(const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("CPEST_OUT_ROOT"); env && *env) return env;
  return "out";
}

struct RunArtifacts {
  PipelineResult result;
  Json summary;
  std::string dir;
};

/// Execute one configured experiment and write run.csv, cp_curve.csv, and
/// summary.json into its output directory.
inline RunArtifacts run_experiment(const ScenarioConfig& cfg, const std::string& out_root) {
  namespace fs = std::filesystem;
  RunArtifacts art;
  art.dir = cfg.output_dir.empty() ? (fs::path(out_root) / cfg.scenario).string()
                                   : cfg.output_dir;
  fs::create_directories(art.dir);
  art.result = run_pipeline(cfg);
  art.summary = make_summary(cfg, art.result);
  write_run_csv(art.result, (fs::path(art.dir) / "run.csv").string());
  if (!art.result.records.empty()) {
    const RunRecord& first = art.result.records.front();
    const RunRecord& last = art.result.records.back();
    CpParams c_est{last.c_hat[0], last.c_hat[1], last.c_hat[2]};
    CpParams c_init{first.c_hat[0], first.c_hat[1], first.c_hat[2]};
    emit_cp_curve(art.result.truth.c, c_est, &c_init, 0.05, 0.5, 201,
                  (fs::path(art.dir) / "cp_curve.csv").string());
  }
  std::ofstream sf((fs::path(art.dir) / "summary.json").string(), std::ios::binary);
  sf << art.summary.dump(2) << '\n';
  return art;
}

struct SweepPoint {
  double te = 0;
  double sup_d = 0;
  double ratio = 0;  ///< sup_d / te for te > 0
  Vec3 e_tilde = Vec3::Zero();
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double ratio_max = 0;
  double ratio_min = 0;
  Json summary;
};

/// Rerun the baseline with small constant load torques while the regressor
/// still assumes none; the regression-equation violation sup|d| should scale
/// like the torque.
inline SweepResult small_te_sweep(const ScenarioConfig& base,
                                  const std::vector<double>& te_magnitudes,
                                  const std::string& out_root) {
  namespace fs = std::filesystem;
  SweepResult sweep;
  fs::path dir = fs::path(out_root) / "sweep-te";
  fs::create_directories(dir);
  for (double te : te_magnitudes) {
    require(te >= 0, "small_te_sweep: magnitudes must be nonnegative");
    ScenarioConfig cfg = base;
    cfg.torque.kind = TorqueProfile::Kind::kConstant;
    cfg.torque.magnitude = te;
    cfg.output_dir.clear();
    PipelineResult res = run_pipeline(cfg);
    SweepPoint p;
    p.te = te;
    p.sup_d = res.nlpre_max;
    p.ratio = (te > 0) ? res.nlpre_max / te : 0.0;
    if (!res.records.empty()) p.e_tilde = res.records.back().e_tilde;
    sweep.points.push_back(p);
  }
  bool any = false;
  for (const SweepPoint& p : sweep.points) {
    if (p.te <= 0) continue;
    if (!any) {
      sweep.ratio_max = sweep.ratio_min = p.ratio;
      any = true;
    }
    sweep.ratio_max = std::max(sweep.ratio_max, p.ratio);
    sweep.ratio_min = std::min(sweep.ratio_min, p.ratio);
  }
  CsvWriter csv((dir / "sweep.csv").string(),
                {"te", "sup_d", "ratio", "e_tilde_1", "e_tilde_2", "e_tilde_3"});
  for (const SweepPoint& p : sweep.points) {
    double row[] = {p.te, p.sup_d, p.ratio, p.e_tilde[0], p.e_tilde[1], p.e_tilde[2]};
    csv.row(row);
  }
  csv.close();
  sweep.summary = Json::object();
  sweep.summary["ratio_max"] = sweep.ratio_max;
  sweep.summary["ratio_min"] = sweep.ratio_min;
  sweep.summary["ratio_spread_factor"] =
      (any && sweep.ratio_min > 0) ? sweep.ratio_max / sweep.ratio_min : 0.0;
  Json pts = Json::array();
  for (const SweepPoint& p : sweep.points)
    pts.push_back({{"te", p.te},
                   {"sup_d", p.sup_d},
                   {"ratio", p.ratio},
                   {"e_tilde", detail::vec_json(p.e_tilde)}});
  sweep.summary["points"] = pts;
  std::ofstream sf((dir / "sweep_summary.json").string(), std::ios::binary);
  sf << sweep.summary.dump(2) << '\n';
  return sweep;
}

}  // namespace cpest
