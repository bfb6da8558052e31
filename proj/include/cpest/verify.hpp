#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpest/harness.hpp"
#include "cpest/oracles.hpp"
#include "cpest/pipeline.hpp"
#include "cpest/rng.hpp"

namespace cpest {

namespace detail {

inline OracleReport timed_check(const std::string& name, double tolerance,
                                const std::function<std::pair<double, std::string>()>& body) {
  OracleReport rep;
  rep.name = name;
  rep.tolerance = tolerance;
  auto t0 = std::chrono::steady_clock::now();
  try {
    auto [residual, meta] = body();
    rep.max_residual = residual;
    rep.metadata = meta;
  } catch (const std::exception& ex) {
    rep.max_residual = std::numeric_limits<double>::infinity();
    rep.metadata = std::string("exception: ") + ex.what();
  }
  auto t1 = std::chrono::steady_clock::now();
  rep.ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  rep.passed = rep.max_residual <= rep.tolerance;
  return rep;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Run the complete independent-check suite. Every check is named, timed, and
/// judged by max residual against its pinned tolerance. The corrupt_adjugate
/// hook deliberately breaks one check to prove the suite can fail.
inline std::vector<OracleReport> run_verification(bool corrupt_adjugate = false) {
  using detail::timed_check;
  namespace fs = std::filesystem;
  std::vector<OracleReport> reports;
  SplitMix64 rng(0x5eedULL);

  ScenarioConfig base = default_config("S1");
  PhysicalParams phys = base.physical();
  CpParams c_true = base.true_c();

  reports.push_back(timed_check("curve-argmax-grid", 1e-5, [&] {
    double grid = grid_argmax_cp(c_true, 1e-5, 1.0, 100000);
    double closed = z_star(c_true);
    std::ostringstream meta;
    meta << "grid=" << grid << " closed=" << closed << " step=1e-5";
    return std::make_pair(std::abs(grid - closed), meta.str());
  }));

  reports.push_back(timed_check("curve-peak-consistency", 1e-12, [&] {
    double direct = cp_reduced(z_star(c_true), c_true);
    double closed = cp_peak(c_true);
    std::ostringstream meta;
    meta << "peak=" << closed;
    return std::make_pair(std::abs(direct - closed), meta.str());
  }));

  reports.push_back(timed_check("curve-argmax-unit", 1e-5, [&] {
    CpParams c{1.0, 1e-9, 1.0};  // c2 ~ 0 puts the optimum at ~1/c3
    double grid = grid_argmax_cp(c, 0.5, 1.5, 100001);
    return std::make_pair(std::abs(grid - z_star(c)), std::string("expected ~1"));
  }));

  reports.push_back(timed_check("map-roundtrip", 1e-12, [&] {
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      CpParams c{40 + 60 * rng.next_u01(), 0.05 + 0.4 * rng.next_u01(),
                 4 + 10 * rng.next_u01()};
      ThetaParams th = theta_from_c(c, phys, 9.0);
      CpParams back = c_from_theta(th, phys, 9.0);
      worst = std::max({worst, std::abs(back.c1 - c.c1) / c.c1,
                        std::abs(back.c2 - c.c2) / c.c2, std::abs(back.c3 - c.c3) / c.c3});
      double z0 = 0.2 + rng.next_u01();
      EtaParams eta = eta_from_theta(th, z0);
      ThetaParams th2 = theta_from_eta(eta);
      worst = std::max({worst, std::abs(th2.theta1 - th.theta1) / th.theta1,
                        std::abs(th2.theta2 - th.theta2) / th.theta2,
                        std::abs(th2.theta3 - th.theta3) / th.theta3});
    }
    return std::make_pair(worst, std::string("samples=1000"));
  }));

  reports.push_back(timed_check("image-consistency", 1e-12, [&] {
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      ThetaParams th;
      th.theta1 = 1 + 500 * rng.next_u01();
      th.theta2 = 1 + 100 * rng.next_u01();
      th.theta3 = 1 + 14 * rng.next_u01();
      GVector g = g_of_theta(th, 0.2 + rng.next_u01());
      double scale = std::abs(g[0] * g[3]) + 1e-300;
      worst = std::max(worst, std::abs(g_consistency(g)) / scale);
    }
    return std::make_pair(worst, std::string("samples=1000, relative"));
  }));

  reports.push_back(timed_check("jacobian-fd", 1e-6, [&] {
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
      Vec3 eta{1e-3 + rng.next_u01(), 1e-3 + rng.next_u01(), 0.5 + 14.5 * rng.next_u01()};
      auto f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return w_of_eta(Vec3(x[0], x[1], x[2]));
      };
      Eigen::MatrixXd fd = finite_difference_jacobian(f, eta);
      worst = std::max(worst, (fd - Eigen::MatrixXd(w_jacobian(eta))).cwiseAbs().maxCoeff());
    }
    return std::make_pair(worst, std::string("samples=200, central step 1e-6"));
  }));

  reports.push_back(timed_check("margin-spectral", 1e-9, [&] {
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec3 eta{1e-3 + rng.next_u01(), 1e-3 + rng.next_u01(), 0.5 + 14.5 * rng.next_u01()};
      double alpha = (0.5 + 4 * rng.next_u01()) * alpha_lower_bound(eta);
      worst = std::max(worst, std::abs(monotonicity_margin(eta, alpha) -
                                       monotonicity_margin_spectral(eta, alpha)));
    }
    return std::make_pair(worst, std::string("samples=1000"));
  }));

  reports.push_back(timed_check("margin-boundary", 1e-9, [&] {
    double worst = 0;
    int positive_failures = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec3 eta{1e-3 + rng.next_u01(), 1e-3 + rng.next_u01(), 0.5 + 14.5 * rng.next_u01()};
      double bound = alpha_lower_bound(eta);
      worst = std::max(worst, std::abs(monotonicity_margin(eta, bound)));
      if (!(monotonicity_margin(eta, 2 * bound) > 0)) ++positive_failures;
    }
    if (positive_failures > 0) worst = std::numeric_limits<double>::infinity();
    std::ostringstream meta;
    meta << "samples=1000 nonpositive-at-2x=" << positive_failures;
    return std::make_pair(worst, meta.str());
  }));

  reports.push_back(timed_check("adjugate-identity", 1e-10, [&] {
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
      Mat4 m;
      for (int r = 0; r < 4; ++r)
        for (int cidx = 0; cidx < 4; ++cidx) m(r, cidx) = rng.next_symmetric(1.0);
      Mat4 adj = adj4_cofactor(m);
      if (corrupt_adjugate) adj(0, 0) += 1e-6;
      Mat4 gap = adj * m - det4_cofactor(m) * Mat4::Identity();
      worst = std::max(worst, gap.cwiseAbs().maxCoeff());
    }
    std::ostringstream meta;
    meta << "samples=200" << (corrupt_adjugate ? " (corruption hook active)" : "");
    return std::make_pair(worst, meta.str());
  }));

  reports.push_back(timed_check("adjugate-cross-impl", 1e-12, [&] {
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      Mat4 m;
      for (int r = 0; r < 4; ++r)
        for (int cidx = 0; cidx < 4; ++cidx) m(r, cidx) = rng.next_symmetric(1.0);
      Eigen::MatrixXd generic = recursive_adjugate(m);
      Mat4 fast = adj4_cofactor(m);
      double scale = fast.cwiseAbs().maxCoeff() + 1e-300;
      worst = std::max(worst, (generic - Eigen::MatrixXd(fast)).cwiseAbs().maxCoeff() / scale);
    }
    return std::make_pair(worst, std::string("samples=100, relative"));
  }));

  reports.push_back(timed_check("det-cross-impl", 1e-12, [&] {
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      Mat4 m;
      for (int r = 0; r < 4; ++r)
        for (int cidx = 0; cidx < 4; ++cidx) m(r, cidx) = rng.next_symmetric(1.0);
      double generic = recursive_determinant(m);
      double fast = det4_cofactor(m);
      worst = std::max(worst, std::abs(generic - fast) / (std::abs(fast) + 1e-300));
    }
    return std::make_pair(worst, std::string("samples=100, relative"));
  }));

  reports.push_back(timed_check("plant-equilibrium", 1e-3, [&] {
    PlantTrajectory traj = simulate(base.omega0, base.wind, base.torque, phys, c_true,
                                    base.integration.h, 500.0, 0.5);
    double zf = traj.z.back();
    std::ostringstream meta;
    meta << "z(500)=" << zf << " c2=" << c_true.c2;
    return std::make_pair(std::abs(zf - c_true.c2), meta.str());
  }));

  reports.push_back(timed_check("plant-step-halving", 1e-8, [&] {
    PlantTrajectory coarse =
        simulate(base.omega0, base.wind, base.torque, phys, c_true, 1e-3, 50.0, 1.0);
    PlantTrajectory fine = reference_trajectory(base.omega0, base.wind, base.torque, phys,
                                                c_true, 1e-3, 50.0, 1.0);
    double worst = 0;
    for (size_t i = 0; i < coarse.size(); ++i)
      worst = std::max(worst, std::abs(coarse.z[i] - fine.z[i]));
    return std::make_pair(worst, std::string("horizon 50 s, reference step h/16"));
  }));

  reports.push_back(timed_check("plant-equilibrium-start", 1e-9, [&] {
    double omega_eq = base.wind.base / c_true.c2;
    PlantTrajectory traj =
        simulate(omega_eq, base.wind, base.torque, phys, c_true, 1e-3, 50.0, 0.5);
    double worst = 0;
    for (double z : traj.z) worst = std::max(worst, std::abs(z - c_true.c2));
    return std::make_pair(worst, std::string("start on the equilibrium ratio"));
  }));

  reports.push_back(timed_check("s1-vector-field", 1e-9, [&] {
    PlantTrajectory traj =
        simulate(base.omega0, base.wind, base.torque, phys, c_true, 1e-3, 60.0, 0.1);
    ThetaParams th = theta_from_c(c_true, phys, base.wind.base);
    double worst = 0;
    for (size_t i = 0; i < traj.size(); ++i)
      worst = std::max(worst, std::abs(traj.zdot[i] - z_dot_s1(traj.z[i], 0.0, th)));
    return std::make_pair(worst, std::string("logged zdot vs closed-form field"));
  }));

  reports.push_back(timed_check("s2-vector-field", 1e-9, [&] {
    ScenarioConfig s2 = default_config("S2");
    PlantTrajectory traj = simulate(s2.omega0, s2.wind, s2.torque, phys, c_true, 1e-3, 60.0,
                                    0.1);
    ThetaParams thb = theta_from_c(c_true, phys, s2.wind.base, false);
    double worst = 0;
    for (size_t i = 0; i < traj.size(); ++i)
      worst = std::max(worst,
                       std::abs(traj.zdot[i] - z_dot_s2(traj.z[i], traj.v_w[i], thb)));
    return std::make_pair(worst, std::string("wind-coupled torque, sinusoidal wind"));
  }));

  reports.push_back(timed_check("s2-constant-wind-matches", 1e-12, [&] {
    ScenarioConfig s2 = default_config("S2");
    s2.wind.kind = WindProfile::Kind::kConstant;
    s2.wind.amplitude = 0;
    s2.wind.frequency = 0;
    PlantTrajectory a =
        simulate(base.omega0, base.wind, base.torque, phys, c_true, 1e-3, 50.0, 0.5);
    PlantTrajectory b =
        simulate(s2.omega0, s2.wind, s2.torque, phys, c_true, 1e-3, 50.0, 0.5);
    double worst = 0;
    for (size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, std::abs(a.z[i] - b.z[i]));
    return std::make_pair(worst, std::string("coupled torque vanishes for constant wind"));
  }));

  reports.push_back(timed_check("filter-step-response", 1e-6, [&] {
    XiState xi;
    FilterBank bank;
    init_regressor(0.9, 1.0, xi, bank);
    double h = 1e-3, t = 0;
    double worst = 0;
    for (int i = 0; i < 5000; ++i) {
      advance(xi, bank, 0.9, 1.0, h);
      t += h;
      worst = std::max(worst, std::abs(bank.fw - (1.0 - std::exp(-t))));
    }
    return std::make_pair(worst, std::string("unit-weight channel vs 1 - exp(-t)"));
  }));

  reports.push_back(timed_check("swapping-lemma", 1e-5, [&] {
    auto x = [](double t) { return t; };
    auto xdot = [](double) { return 1.0; };
    auto u = [](double t) { return std::sin(t); };
    auto udot = [](double t) { return std::cos(t); };
    double res = swapping_residual(x, xdot, u, udot, 1.0, 1e-4, 10.0);
    return std::make_pair(res, std::string("x=t, u=sin, horizon 10 s"));
  }));

  ScenarioConfig short_cfg = base;
  short_cfg.integration.t_f = 60.0;
  PipelineResult short_run = run_pipeline(short_cfg);

  reports.push_back(timed_check("pipeline-regression-exactness", 1e-6, [&] {
    if (short_run.aborted) return std::make_pair(1.0, short_run.abort_reason);
    return std::make_pair(short_run.nlpre_max, std::string("noiseless 60 s baseline"));
  }));

  reports.push_back(timed_check("pipeline-identity-residual", 1e-8, [&] {
    return std::make_pair(short_run.key_identity_max, std::string("noiseless 60 s baseline"));
  }));

  reports.push_back(timed_check("pipeline-ls-transfer-identity", 1e-6, [&] {
    return std::make_pair(short_run.wt_identity_max,
                          std::string("parameter error vs information-matrix transfer"));
  }));

  reports.push_back(timed_check("pipeline-adjugate-identity", 1e-10, [&] {
    return std::make_pair(short_run.adj_identity_max,
                          std::string("checked at every recorded sample"));
  }));

  reports.push_back(timed_check("pipeline-delta-monotone", 1e-10, [&] {
    double drop = 0;
    for (size_t i = 1; i < short_run.records.size(); ++i)
      drop = std::max(drop,
                      short_run.records[i - 1].Delta - short_run.records[i].Delta);
    return std::make_pair(drop, std::string("max single-sample decrease"));
  }));

  reports.push_back(timed_check("pipeline-info-decay", 1e-12, [&] {
    double rise = 0;
    for (size_t i = 1; i < short_run.records.size(); ++i)
      rise = std::max(rise, short_run.records[i].lambda_max_F -
                                short_run.records[i - 1].lambda_max_F);
    return std::make_pair(rise, std::string("largest eigenvalue of F never grows"));
  }));

  reports.push_back(timed_check("pipeline-lyapunov-decrease", 1e-9, [&] {
    double u0 = short_run.records.front().u_lyap;
    double rise = 0;
    for (size_t i = 1; i < short_run.records.size(); ++i)
      rise = std::max(rise,
                      short_run.records[i].u_lyap - short_run.records[i - 1].u_lyap);
    return std::make_pair(rise / (u0 + 1e-300),
                          std::string("relative to the initial value"));
  }));

  reports.push_back(timed_check("pipeline-xi-monotone", 0.0, [&] {
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < short_run.records.size(); ++i) {
      worst = std::max(worst,
                       short_run.records[i].xi1 - short_run.records[i - 1].xi1);
      worst = std::max(worst,
                       short_run.records[i - 1].xi2 - short_run.records[i].xi2);
    }
    return std::make_pair(worst, std::string("xi1 strictly down, xi2 strictly up"));
  }));

  reports.push_back(timed_check("pipeline-excitation-positive", 0.0, [&] {
    std::vector<RegressorSample> samples;
    XiState xi;
    FilterBank bank;
    double h = 1e-3, t = 0;
    double omega = short_cfg.omega0;
    init_regressor(base.wind.base / omega, short_cfg.sigma, xi, bank);
    for (int i = 0; i < 20000; ++i) {
      double z = base.wind.base / omega;
      samples.push_back(emit_sample(xi, bank, z, 1.0, t));
      advance(xi, bank, z, 1.0, h);
      PlantState ps{omega, t};
      ps = step(ps, base.wind, base.torque, phys, c_true, h);
      omega = ps.omega;
      t = ps.t;
    }
    double level = ie_index(samples);
    std::ostringstream meta;
    meta << "gram-min-eig=" << level << " over 20 s";
    return std::make_pair(-level, meta.str());
  }));

  reports.push_back(timed_check("ls-pe-sanity", 0.05, [&] {
    Vec4 w_true{0.3, -0.7, 1.1, 0.4};
    EstimatorGains g;
    g.alpha = 1.0;
    EstimatorState st = init_estimator(g, Vec3::Ones());
    double h = 1e-3;
    double lmax0 = max_eigenvalue(st.F);
    for (int i = 0; i < 40000; ++i) {
      double t = i * h;
      RegressorSample sm;
      sm.t = t;
      sm.phi << std::sin(t), std::cos(t), std::sin(2 * t), std::cos(2 * t),
          std::cos(3 * t), std::sin(3 * t), std::cos(5 * t), std::sin(5 * t);
      sm.y = sm.phi * w_true;
      ls_update(st, sm, g.gamma_w, h);
    }
    double err_ratio = (st.W_hat - w_true).norm() / (Vec4::Zero() - w_true).norm();
    double lmax_ratio = max_eigenvalue(st.F) / lmax0;
    std::ostringstream meta;
    meta << "err-ratio=" << err_ratio << " lmax-ratio=" << lmax_ratio;
    return std::make_pair(std::max(err_ratio, lmax_ratio), meta.str());
  }));

  reports.push_back(timed_check("run-determinism", 0.0, [&] {
    ScenarioConfig cfg = default_config("S1-noise");
    cfg.integration.t_f = 5.0;
    fs::path root = fs::temp_directory_path() / "cpest-verify-determinism";
    fs::remove_all(root);
    ScenarioConfig a = cfg, b = cfg;
    a.output_dir = (root / "a").string();
    b.output_dir = (root / "b").string();
    run_experiment(a, root.string());
    run_experiment(b, root.string());
    std::string bytes_a = detail::read_file_bytes((root / "a" / "run.csv").string());
    std::string bytes_b = detail::read_file_bytes((root / "b" / "run.csv").string());
    bool same = !bytes_a.empty() && bytes_a == bytes_b;
    fs::remove_all(root);
    std::ostringstream meta;
    meta << "bytes=" << bytes_a.size();
    return std::make_pair(same ? 0.0 : 1.0, meta.str());
  }));

  reports.push_back(timed_check("config-strictness", 0.0, [&] {
    double residual = 0;
    Json good = config_to_json(default_config("S1"));
    ScenarioConfig parsed = parse_config(good);
    Json round = config_to_json(parsed);
    if (round != good) residual = 1;
    Json bad = good;
    bad["not_a_key"] = 1;
    bool rejected = false;
    try {
      parse_config(bad);
    } catch (const ConfigError&) {
      rejected = true;
    }
    if (!rejected) residual = 1;
    Json nested = good;
    nested["gains"]["typo"] = 2;
    rejected = false;
    try {
      parse_config(nested);
    } catch (const ConfigError&) {
      rejected = true;
    }
    if (!rejected) residual = 1;
    return std::make_pair(residual, std::string("roundtrip + unknown-key rejection"));
  }));

  return reports;
}

inline bool all_passed(const std::vector<OracleReport>& reports) {
  for (const OracleReport& r : reports)
    if (!r.passed) return false;
  return true;
}

inline Json reports_to_json(const std::vector<OracleReport>& reports) {
  Json arr = Json::array();
  for (const OracleReport& r : reports)
    arr.push_back({{"name", r.name},
                   {"max_residual", r.max_residual},
                   {"tolerance", r.tolerance},
                   {"passed", r.passed},
                   {"ms", r.ms},
                   {"metadata", r.metadata}});
  return arr;
}

}  // namespace cpest
