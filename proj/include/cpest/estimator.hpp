#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "cpest/parameter_maps.hpp"
#include "cpest/plant.hpp"
#include "cpest/regressor.hpp"

namespace cpest {

/// Tuning of the interlaced least-squares + mixing estimator.
struct EstimatorGains {
  double gamma_w = 100.0;  ///< least-squares adaptation gain
  double f0 = 1.0;         ///< initial information scale, F(0) = (1/f0)*I
  Mat3 gamma = (Eigen::Vector3d() << 50.0, 50.0, 500.0).finished().asDiagonal();
  double alpha = 0.0;      ///< selector-matrix entry; must exceed the monotonicity bound
  double eta_floor = 1e-8; ///< componentwise projection bound

  void validate() const {
    require(gamma_w > 0 && f0 > 0, "EstimatorGains: gamma_w and f0 must be positive");
    require(alpha > 0, "EstimatorGains: alpha must be positive");
    require(eta_floor > 0, "EstimatorGains: eta_floor must be positive");
    require((gamma - gamma.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
            "EstimatorGains: gamma must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(gamma);
    require(es.eigenvalues()(0) > 0, "EstimatorGains: gamma must be positive definite");
  }
};

/// Least-squares stage (W_hat, F) plus mixed-stage estimate eta_hat.
struct EstimatorState {
  Vec4 W_hat = Vec4::Zero();
  Mat4 F = Mat4::Identity();
  Vec3 eta_hat = Vec3::Zero();
  Vec4 W0 = Vec4::Zero();  ///< recorded initial W_hat, reused by the mixing step
};

inline EstimatorState init_estimator(const EstimatorGains& gains, const Vec3& eta0,
                                     const Vec4& w_hat0 = Vec4::Zero()) {
  gains.validate();
  EstimatorState st;
  st.W_hat = w_hat0;
  st.W0 = w_hat0;
  st.F = Mat4::Identity() / gains.f0;
  st.eta_hat = eta0;
  return st;
}

/// Scalarized regression produced by the mixing step: Delta * W(eta) = Y.
struct MixedSample {
  double Delta = 0;
  Vec4 Y = Vec4::Zero();
};

namespace detail {
inline double minor3(const Mat4& m, int r0, int r1, int r2, int c0, int c1, int c2) {
  return m(r0, c0) * (m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1)) -
         m(r0, c1) * (m(r1, c0) * m(r2, c2) - m(r1, c2) * m(r2, c0)) +
         m(r0, c2) * (m(r1, c0) * m(r2, c1) - m(r1, c1) * m(r2, c0));
}
}  // namespace detail

/// 4x4 determinant by cofactor expansion along the first row.
inline double det4_cofactor(const Mat4& m) {
  return m(0, 0) * detail::minor3(m, 1, 2, 3, 1, 2, 3) -
         m(0, 1) * detail::minor3(m, 1, 2, 3, 0, 2, 3) +
         m(0, 2) * detail::minor3(m, 1, 2, 3, 0, 1, 3) -
         m(0, 3) * detail::minor3(m, 1, 2, 3, 0, 1, 2);
}

/// 4x4 adjugate (transposed cofactor matrix) from explicit 3x3 minors; defined
/// for singular input, satisfying adj(M)*M = det(M)*I.
inline Mat4 adj4_cofactor(const Mat4& m) {
  static constexpr int kOther[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  Mat4 adj;
  for (int i = 0; i < 4; ++i) {
    const int* rr = kOther[i];
    for (int j = 0; j < 4; ++j) {
      const int* cc = kOther[j];
      double minor = detail::minor3(m, rr[0], rr[1], rr[2], cc[0], cc[1], cc[2]);
      double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(j, i) = sign * minor;  // transpose of the cofactor matrix
    }
  }
  return adj;
}

/// Continuous-time least-squares rates for one regressor sample:
///   dW/dt = gamma_w * F * phi' * (y - phi*W),  dF/dt = -gamma_w * F * phi'*phi * F.
inline void ls_rates(const Vec4& w, const Mat4& f, const Mat24& phi, const Eigen::Vector2d& y,
                     double gamma_w, Vec4& dw, Mat4& df) {
  Eigen::Vector2d e = y - phi * w;
  dw = gamma_w * (f * (phi.transpose() * e));
  Mat4 pp = phi.transpose() * phi;
  df = -gamma_w * (f * pp * f);
}

inline double min_eigenvalue(const Mat4& m) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (m + m.transpose()),
                                         Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Mat4& m) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (m + m.transpose()),
                                         Eigen::EigenvaluesOnly);
  return es.eigenvalues()(3);
}

inline constexpr double kSpdFloor = 1e-14;

inline void check_spd(const Mat4& f, double t) {
  double lmin = min_eigenvalue(f);
  if (lmin < kSpdFloor)
    throw NumericAbort("estimator: information matrix lost positive definiteness (min eig " +
                       std::to_string(lmin) + ") at t = " + std::to_string(t));
}

/// One fixed step of the least-squares stage holding the sample constant.
/// F is re-symmetrized afterwards and its positive definiteness enforced.
inline void ls_update(EstimatorState& st, const RegressorSample& sample, double gamma_w,
                      double h) {
  require(h > 0, "ls_update: step size must be positive");
  Vec4 kw1, kw2, kw3, kw4;
  Mat4 kf1, kf2, kf3, kf4;
  ls_rates(st.W_hat, st.F, sample.phi, sample.y, gamma_w, kw1, kf1);
  ls_rates(st.W_hat + 0.5 * h * kw1, st.F + 0.5 * h * kf1, sample.phi, sample.y, gamma_w, kw2,
           kf2);
  ls_rates(st.W_hat + 0.5 * h * kw2, st.F + 0.5 * h * kf2, sample.phi, sample.y, gamma_w, kw3,
           kf3);
  ls_rates(st.W_hat + h * kw3, st.F + h * kf3, sample.phi, sample.y, gamma_w, kw4, kf4);
  st.W_hat += (h / 6.0) * (kw1 + 2 * kw2 + 2 * kw3 + kw4);
  st.F += (h / 6.0) * (kf1 + 2 * kf2 + 2 * kf3 + kf4);
  st.F = 0.5 * (st.F + st.F.transpose()).eval();
  check_spd(st.F, sample.t);
}

/// Scalarize the vector regression: Delta = det(I - f0*F),
/// Y = adj(I - f0*F) * (W_hat - f0*F*W0).
inline MixedSample mix(const EstimatorState& st, double f0) {
  Mat4 m = Mat4::Identity() - f0 * st.F;
  MixedSample out;
  out.Delta = det4_cofactor(m);
  out.Y = adj4_cofactor(m) * (st.W_hat - f0 * (st.F * st.W0));
  return out;
}

/// Componentwise clamp onto the admissible region.
inline Vec3 project(const Vec3& eta_hat, double eta_floor) {
  return eta_hat.cwiseMax(eta_floor);
}

/// Mixed-stage rate: d(eta_hat)/dt = Gamma * Delta * T * (Y - Delta*W(eta_hat))
/// with T = [[alpha,0,0,0],[0,alpha,0,0],[0,0,0,1]] applied inline.
inline Vec3 eta_rates(const Vec3& eta_hat, double delta, const Vec4& y,
                      const EstimatorGains& gains) {
  Vec4 r = y - delta * w_of_eta(eta_hat);
  Vec3 tr{gains.alpha * r[0], gains.alpha * r[1], r[3]};
  return gains.gamma * (delta * tr);
}

/// One fixed step of the mixed stage holding (Delta, Y) constant, then projection.
inline void eta_update(EstimatorState& st, const MixedSample& mixed,
                       const EstimatorGains& gains, double h) {
  require(h > 0, "eta_update: step size must be positive");
  Vec3 k1 = eta_rates(st.eta_hat, mixed.Delta, mixed.Y, gains);
  Vec3 k2 = eta_rates(st.eta_hat + 0.5 * h * k1, mixed.Delta, mixed.Y, gains);
  Vec3 k3 = eta_rates(st.eta_hat + 0.5 * h * k2, mixed.Delta, mixed.Y, gains);
  Vec3 k4 = eta_rates(st.eta_hat + h * k3, mixed.Delta, mixed.Y, gains);
  st.eta_hat += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  st.eta_hat = project(st.eta_hat, gains.eta_floor);
}

/// Stability-driven substep count for the mixed stage: the fast rows have local
/// rate Delta^2*alpha*max(Gamma11, Gamma22); the third row contributes
/// Delta^2*Gamma33*(|eta3| + |eta2|). Explicit 4th-order stepping is stable for
/// rate*h below ~2.78; 1.8 leaves margin.
inline long eta_substep_count(double h, double delta_max, const Vec3& eta_hat,
                              const EstimatorGains& gains) {
  double g01 = std::max(gains.gamma(0, 0), gains.gamma(1, 1));
  double rate = delta_max * delta_max *
                (gains.alpha * g01 +
                 gains.gamma(2, 2) * (std::abs(eta_hat[2]) + std::abs(eta_hat[1])));
  long n = static_cast<long>(h * rate / 1.8) + 1;
  if (n > 2'000'000)
    throw NumericAbort("estimator: mixed-stage substep count " + std::to_string(n) +
                       " exceeds budget; gains too stiff for the step size");
  return n;
}

/// Advance eta_hat across one outer step of size h with n substeps, the
/// (Delta, Y) inputs interpolated quadratically through their values at the
/// outer stage nodes t, t+h/2, t+h. With n = 1 this is exactly the coupled
/// classical step. Projection applies after every substep.
inline void eta_advance_interpolated(Vec3& eta_hat, double h, long n_sub, double d0, double dm,
                                     double d1, const Vec4& y0, const Vec4& ym, const Vec4& y1,
                                     const EstimatorGains& gains) {
  auto weights = [h](double s, double& w0, double& w1, double& w2) {
    w0 = (s - 0.5 * h) * (s - h) / (0.5 * h * h);
    w1 = s * (s - h) / (-0.25 * h * h);
    w2 = s * (s - 0.5 * h) / (0.5 * h * h);
  };
  double hs = h / static_cast<double>(n_sub);
  for (long m = 0; m < n_sub; ++m) {
    double s0 = static_cast<double>(m) * hs;
    double wa0, wa1, wa2, wb0, wb1, wb2, wc0, wc1, wc2;
    weights(s0, wa0, wa1, wa2);
    weights(s0 + 0.5 * hs, wb0, wb1, wb2);
    weights(s0 + hs, wc0, wc1, wc2);
    double da = wa0 * d0 + wa1 * dm + wa2 * d1;
    double db = wb0 * d0 + wb1 * dm + wb2 * d1;
    double dc = wc0 * d0 + wc1 * dm + wc2 * d1;
    Vec4 ya = wa0 * y0 + wa1 * ym + wa2 * y1;
    Vec4 yb = wb0 * y0 + wb1 * ym + wb2 * y1;
    Vec4 yc = wc0 * y0 + wc1 * ym + wc2 * y1;
    Vec3 k1 = eta_rates(eta_hat, da, ya, gains);
    Vec3 k2 = eta_rates(eta_hat + 0.5 * hs * k1, db, yb, gains);
    Vec3 k3 = eta_rates(eta_hat + 0.5 * hs * k2, db, yb, gains);
    Vec3 k4 = eta_rates(eta_hat + hs * k3, dc, yc, gains);
    eta_hat += (hs / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    eta_hat = project(eta_hat, gains.eta_floor);
  }
}

/// Recover the physical curve parameters from eta_hat:
///   c1 = (J/(kappa*v_w)) * exp(eta3*z0) * eta1, c2 = eta2/eta1, c3 = eta3,
/// with the v_w divisor dropped for the wind-independent scaling.
inline CpParams c_hat(const Vec3& eta_hat, double z0, const PhysicalParams& phys, double v_w,
                      bool wind_scaled = true) {
  require(eta_hat[0] > 0, "c_hat: eta1 must be positive (projection precedes recovery)");
  double scale = phys.inertia / (phys.kappa * (wind_scaled ? v_w : 1.0));
  CpParams c;
  c.c1 = scale * std::exp(eta_hat[2] * z0) * eta_hat[0];
  c.c2 = eta_hat[1] / eta_hat[0];
  c.c3 = eta_hat[2];
  return c;
}

}  // namespace cpest
