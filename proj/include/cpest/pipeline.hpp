#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cpest/estimator.hpp"
#include "cpest/parameter_maps.hpp"
#include "cpest/plant.hpp"
#include "cpest/regressor.hpp"
#include "cpest/rng.hpp"
#include "cpest/scenario.hpp"
#include "cpest/z_dynamics.hpp"

namespace cpest {

/// One sampled row of a pipeline run. The leading fields match the CSV
/// contract; the rest are diagnostics derivable from no extra computation.
struct RunRecord {
  double t = 0;
  double z = 0;
  double omega = 0;
  double y1 = 0;
  double y2 = 0;
  double Delta = 0;
  double lambda_min_F = 0;
  double lambda_max_F = 0;
  Vec3 eta_hat = Vec3::Zero();
  Vec3 c_hat = Vec3::Zero();
  Vec3 e_tilde = Vec3::Zero();
  double zdot = 0;
  double v_w = 0;
  double te = 0;
  double xi1 = 0;
  double xi2 = 0;
  Vec4 W_hat = Vec4::Zero();
  double W_err = 0;          ///< ||W_hat - g_true||
  double eta_err = 0;        ///< ||eta_hat - eta_true||
  double nlpre_resid = 0;    ///< max-abs of y - phi*g_true at this sample
  double key_id_resid = 0;   ///< filtered-identity residual at this sample
  double u_lyap = 0;         ///< (1/2) eta_err' * Gamma^-1 * eta_err
  long substeps = 0;         ///< mixed-stage substeps of the preceding step (0 = none ran)
};

/// Reference quantities the run is judged against.
struct PipelineTruth {
  PhysicalParams phys;
  CpParams c;
  ThetaParams theta;
  Vec3 eta = Vec3::Zero();
  GVector g = GVector::Zero();
  double z0_drive = 0;   ///< z(0) as seen by the regressor (measured when noisy)
  double z_star = 0;
  double v_w_nominal = 0;
  bool wind_scaled = true;
};

struct PipelineResult {
  PipelineTruth truth;
  std::vector<RunRecord> records;
  double nlpre_max = 0;         ///< sup over steps of the regression-equation residual
  double key_identity_max = 0;  ///< sup over steps of the filtered-identity residual
  double wt_identity_max = 0;   ///< sup over records of ||W_err - f0*F*W_err(0)||
  double adj_identity_max = 0;  ///< sup over records of ||adj(M)M - det(M)I||
  long max_substeps = 0;
  bool aborted = false;
  std::string abort_reason;
};

namespace detail {

struct CoupledState {
  double omega = 0;
  XiState xi;
  FilterBank bank;
  Vec4 W = Vec4::Zero();
  Mat4 F = Mat4::Identity();
};

struct CoupledRates {
  double omega = 0;
  XiState xi;
  FilterBank bank;
  Vec4 W = Vec4::Zero();
  Mat4 F = Mat4::Zero();
};

inline CoupledState advance_state(const CoupledState& x, double a, const CoupledRates& k) {
  CoupledState out = x;
  out.omega = x.omega + a * k.omega;
  axpy(x.xi, a, k.xi, out.xi);
  axpy(x.bank, a, k.bank, out.bank);
  out.W = x.W + a * k.W;
  out.F = x.F + a * k.F;
  return out;
}

struct StageEval {
  CoupledRates rates;
  RegressorSample sample;
  double Delta = 0;
  Vec4 Y = Vec4::Zero();
};

}  // namespace detail

/// Execute one experiment: plant truth, filtered-regressor construction, the
/// least-squares stage, and the mixed gradient stage share a single
/// fourth-order step. Noiseless runs drive the regressor with the
/// stage-consistent true speed ratio; noisy runs hold one measurement per step
/// across all stages. Numeric aborts end the run early and are recorded.
inline PipelineResult run_pipeline(const ScenarioConfig& cfg) {
  cfg.validate();
  PipelineResult out;

  PhysicalParams phys = cfg.physical();
  CpParams c_true = cfg.true_c();
  EstimatorGains gains = cfg.estimator_gains();
  const WindProfile& wind = cfg.wind;
  const TorqueProfile& torque = cfg.torque;
  const bool wind_scaled = cfg.wind_scaled();
  const bool mixing = cfg.mixing_enabled();
  const bool noisy = cfg.noise.enabled();
  const double v_w_nominal = wind.base;
  const double h = cfg.integration.h;

  SplitMix64 rng(cfg.noise.seed);

  detail::CoupledState s;
  s.omega = cfg.omega0;

  double z0_drive;
  if (noisy) {
    Measurement m0 = measure(PlantState{s.omega, 0.0}, wind.value(0.0), cfg.noise, rng);
    z0_drive = m0.v_w_meas / m0.omega_meas;
  } else {
    z0_drive = wind.value(0.0) / s.omega;
  }
  require(z0_drive > 0, "run_pipeline: initial speed ratio must be positive");

  PipelineTruth truth;
  truth.phys = phys;
  truth.c = c_true;
  truth.theta = theta_from_c(c_true, phys, v_w_nominal, wind_scaled);
  EtaParams eta_true_p = eta_from_theta(truth.theta, z0_drive);
  truth.eta = Vec3{eta_true_p.eta1, eta_true_p.eta2, eta_true_p.eta3};
  truth.g = g_of_theta(truth.theta, z0_drive);
  truth.z0_drive = z0_drive;
  truth.z_star = z_star(c_true);
  truth.v_w_nominal = v_w_nominal;
  truth.wind_scaled = wind_scaled;
  out.truth = truth;

  init_regressor(z0_drive, cfg.sigma, s.xi, s.bank);
  EstimatorState est = init_estimator(gains, cfg.initial_eta(truth.eta));
  s.W = est.W_hat;
  s.F = est.F;

  const double t_f = cfg.integration.t_f;
  const long n_steps = static_cast<long>(std::llround(t_f / h));
  const long per_record = static_cast<long>(std::llround(cfg.integration.stride / h));
  if (t_f == 0) return out;

  Vec3 gamma_inv_diag{1.0 / gains.gamma(0, 0), 1.0 / gains.gamma(1, 1),
                      1.0 / gains.gamma(2, 2)};
  Vec4 w_err0 = s.W - truth.g;
  long last_substeps = 0;

  auto theta_terms = [&](double z, double zdot_truth, double w_truth,
                         const detail::CoupledState& st) {
    double z3 = z * z * z;
    double z4 = z3 * z;
    double lhs = std::exp(truth.theta.theta3 * z0_drive) * zdot_truth +
                 truth.theta.theta1 * truth.theta.theta3 * st.xi.xi1 * zdot_truth +
                 truth.theta.theta2 * truth.theta.theta3 * st.xi.xi2 * zdot_truth +
                 w_truth * (truth.theta.theta1 * z4 - truth.theta.theta2 * z3);
    return std::abs(lhs);
  };

  auto record_row = [&](double t, const detail::CoupledState& st, const EstimatorState& es,
                        long substeps) {
    RunRecord r;
    r.t = t;
    r.v_w = wind.value(t);
    r.omega = st.omega;
    r.z = r.v_w / st.omega;
    double omdot = rotor_acceleration(t, st.omega, wind, torque, phys, c_true);
    r.zdot = wind.derivative(t) / st.omega - r.z * omdot / st.omega;
    r.te = torque.value(t, st.omega, wind, phys);
    r.xi1 = st.xi.xi1;
    r.xi2 = st.xi.xi2;
    double w_truth = wind_scaled ? 1.0 : r.v_w;
    RegressorSample sm = emit_sample(st.xi, st.bank, r.z, w_truth, t);
    r.y1 = sm.y[0];
    r.y2 = sm.y[1];
    r.nlpre_resid = (sm.y - sm.phi * truth.g).cwiseAbs().maxCoeff();
    r.key_id_resid = theta_terms(r.z, r.zdot, w_truth, st);
    Eigen::SelfAdjointEigenSolver<Mat4> eig(st.F, Eigen::EigenvaluesOnly);
    r.lambda_min_F = eig.eigenvalues()(0);
    r.lambda_max_F = eig.eigenvalues()(3);
    if (r.lambda_min_F < kSpdFloor)
      throw NumericAbort("run_pipeline: information matrix lost positive definiteness at t = " +
                         std::to_string(t));
    MixedSample mx;
    if (mixing) mx = mix(es, gains.f0);
    r.Delta = mx.Delta;
    r.eta_hat = es.eta_hat;
    CpParams ch = c_hat(es.eta_hat, z0_drive, phys, v_w_nominal, wind_scaled);
    r.c_hat = Vec3{ch.c1, ch.c2, ch.c3};
    r.e_tilde = Vec3{std::abs(ch.c1 - c_true.c1) / c_true.c1,
                     std::abs(ch.c2 - c_true.c2) / c_true.c2,
                     std::abs(ch.c3 - c_true.c3) / c_true.c3};
    r.W_hat = st.W;
    r.W_err = (st.W - truth.g).norm();
    Vec3 eta_err_v = es.eta_hat - truth.eta;
    r.eta_err = eta_err_v.norm();
    r.u_lyap = 0.5 * eta_err_v.dot(gamma_inv_diag.cwiseProduct(eta_err_v).matrix());
    r.substeps = substeps;

    Vec4 wt_pred = gains.f0 * (st.F * w_err0);
    out.wt_identity_max =
        std::max(out.wt_identity_max, ((st.W - truth.g) - wt_pred).norm());
    Mat4 m = Mat4::Identity() - gains.f0 * st.F;
    Mat4 ident_gap = adj4_cofactor(m) * m - det4_cofactor(m) * Mat4::Identity();
    out.adj_identity_max =
        std::max(out.adj_identity_max, ident_gap.cwiseAbs().maxCoeff());
    out.records.push_back(r);
  };

  auto eval_stage = [&](double t_s, const detail::CoupledState& st, double z_drive,
                        double w_drive) {
    detail::StageEval ev;
    ev.rates.omega = rotor_acceleration(t_s, st.omega, wind, torque, phys, c_true);
    regressor_rates(st.xi, st.bank, z_drive, w_drive, ev.rates.xi, ev.rates.bank);
    ev.sample = emit_sample(st.xi, st.bank, z_drive, w_drive, t_s);
    ls_rates(st.W, st.F, ev.sample.phi, ev.sample.y, gains.gamma_w, ev.rates.W, ev.rates.F);
    if (mixing) {
      EstimatorState tmp;
      tmp.W_hat = st.W;
      tmp.F = st.F;
      tmp.W0 = est.W0;
      MixedSample mx = mix(tmp, gains.f0);
      ev.Delta = mx.Delta;
      ev.Y = mx.Y;
    }
    return ev;
  };

  try {
    record_row(0.0, s, est, 0);
    for (long i = 0; i < n_steps; ++i) {
      double t = static_cast<double>(i) * h;

      double z_meas = 0, w_meas = 0;
      if (noisy) {
        Measurement m = measure(PlantState{s.omega, t}, wind.value(t), cfg.noise, rng);
        if (m.omega_meas <= kOmegaFloor)
          throw NumericAbort("run_pipeline: measured rotor speed at or below floor at t = " +
                             std::to_string(t));
        z_meas = m.v_w_meas / m.omega_meas;
        w_meas = wind_scaled ? 1.0 : m.v_w_meas;
        if (z_meas <= 0)
          throw NumericAbort("run_pipeline: measured speed ratio nonpositive at t = " +
                             std::to_string(t));
      }

      auto drive = [&](double t_s, const detail::CoupledState& st, double& z_d, double& w_d) {
        if (noisy) {
          z_d = z_meas;
          w_d = w_meas;
        } else {
          double v = wind.value(t_s);
          z_d = v / st.omega;
          w_d = wind_scaled ? 1.0 : v;
        }
      };

      double zd, wd;
      drive(t, s, zd, wd);
      detail::StageEval e1 = eval_stage(t, s, zd, wd);

      {
        double z_truth = wind.value(t) / s.omega;
        double zdot_truth =
            wind.derivative(t) / s.omega - z_truth * e1.rates.omega / s.omega;
        double w_truth = wind_scaled ? 1.0 : wind.value(t);
        out.key_identity_max =
            std::max(out.key_identity_max, theta_terms(z_truth, zdot_truth, w_truth, s));
        out.nlpre_max = std::max(
            out.nlpre_max, (e1.sample.y - e1.sample.phi * truth.g).cwiseAbs().maxCoeff());
      }

      detail::CoupledState s2 = detail::advance_state(s, 0.5 * h, e1.rates);
      drive(t + 0.5 * h, s2, zd, wd);
      detail::StageEval e2 = eval_stage(t + 0.5 * h, s2, zd, wd);

      detail::CoupledState s3 = detail::advance_state(s, 0.5 * h, e2.rates);
      drive(t + 0.5 * h, s3, zd, wd);
      detail::StageEval e3 = eval_stage(t + 0.5 * h, s3, zd, wd);

      detail::CoupledState s4 = detail::advance_state(s, h, e3.rates);
      drive(t + h, s4, zd, wd);
      detail::StageEval e4 = eval_stage(t + h, s4, zd, wd);

      detail::CoupledRates sum;
      sum.omega = e1.rates.omega + 2 * e2.rates.omega + 2 * e3.rates.omega + e4.rates.omega;
      detail::axpy(e1.rates.xi, 2.0, e2.rates.xi, sum.xi);
      detail::axpy(sum.xi, 2.0, e3.rates.xi, sum.xi);
      detail::axpy(sum.xi, 1.0, e4.rates.xi, sum.xi);
      detail::axpy(e1.rates.bank, 2.0, e2.rates.bank, sum.bank);
      detail::axpy(sum.bank, 2.0, e3.rates.bank, sum.bank);
      detail::axpy(sum.bank, 1.0, e4.rates.bank, sum.bank);
      sum.W = e1.rates.W + 2 * e2.rates.W + 2 * e3.rates.W + e4.rates.W;
      sum.F = e1.rates.F + 2 * e2.rates.F + 2 * e3.rates.F + e4.rates.F;
      s = detail::advance_state(s, h / 6.0, sum);
      s.F = 0.5 * (s.F + s.F.transpose()).eval();

      if (mixing) {
        double d_mid = 0.5 * (e2.Delta + e3.Delta);
        Vec4 y_mid = 0.5 * (e2.Y + e3.Y);
        double d_max = std::max(std::abs(e1.Delta), std::abs(e4.Delta));
        last_substeps = eta_substep_count(h, d_max, est.eta_hat, gains);
        out.max_substeps = std::max(out.max_substeps, last_substeps);
        eta_advance_interpolated(est.eta_hat, h, last_substeps, e1.Delta, d_mid, e4.Delta,
                                 e1.Y, y_mid, e4.Y, gains);
      }
      est.W_hat = s.W;
      est.F = s.F;

      if ((i + 1) % per_record == 0 || i + 1 == n_steps)
        record_row(static_cast<double>(i + 1) * h, s, est, last_substeps);
    }
  } catch (const NumericAbort& abort) {
    out.aborted = true;
    out.abort_reason = abort.what();
  }
  return out;
}

}  // namespace cpest
