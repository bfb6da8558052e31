#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "cpest/power_curve.hpp"

namespace cpest {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat43 = Eigen::Matrix<double, 4, 3>;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// 4-vector image of the curve parameters that the least-squares stage estimates.
using GVector = Vec4;

/// Curve parameters scaled into the z-dynamics vector field.
/// wind_scaled = true: theta = (kappa*v_w*c1/J, kappa*v_w*c1*c2/J, c3) for the
/// constant-wind, zero-load scenario. wind_scaled = false drops the v_w factor;
/// the wind speed then multiplies the vector field explicitly (varying-wind scenario).
struct ThetaParams {
  double theta1 = 0;
  double theta2 = 0;
  double theta3 = 0;
  bool wind_scaled = true;

  void validate() const {
    require(theta1 > 0 && theta2 > 0 && theta3 > 0,
            "ThetaParams: all components must be positive");
  }
};

/// Exponentially rescaled parameters eta = (exp(-theta3*z0)*theta1,
/// exp(-theta3*z0)*theta2, theta3). The rescaling by the known initial ratio z0
/// makes the 4-vector image polynomial in eta.
struct EtaParams {
  double eta1 = 0;
  double eta2 = 0;
  double eta3 = 0;
  double z0 = 0;          ///< initial speed ratio z(0) used in the rescaling
  bool wind_scaled = true;

  void validate() const {
    require(eta1 > 0 && eta2 > 0 && eta3 > 0, "EtaParams: all components must be positive");
    require(z0 > 0, "EtaParams: z0 must be positive");
  }
};

inline ThetaParams theta_from_c(const CpParams& c, const PhysicalParams& phys, double v_w,
                                bool wind_scaled = true) {
  c.validate();
  phys.validate();
  if (wind_scaled) require(v_w > 0, "theta_from_c: v_w must be positive");
  double scale = phys.kappa * (wind_scaled ? v_w : 1.0) / phys.inertia;
  ThetaParams th;
  th.theta1 = scale * c.c1;
  th.theta2 = scale * c.c1 * c.c2;
  th.theta3 = c.c3;
  th.wind_scaled = wind_scaled;
  return th;
}

inline CpParams c_from_theta(const ThetaParams& th, const PhysicalParams& phys, double v_w) {
  require(th.theta1 != 0, "c_from_theta: theta1 = 0 makes the inverse singular");
  double scale = phys.kappa * (th.wind_scaled ? v_w : 1.0) / phys.inertia;
  CpParams c;
  c.c1 = th.theta1 / scale;
  c.c2 = th.theta2 / th.theta1;
  c.c3 = th.theta3;
  return c;
}

inline EtaParams eta_from_theta(const ThetaParams& th, double z0) {
  require(z0 > 0, "eta_from_theta: z0 must be positive");
  double s = std::exp(-th.theta3 * z0);
  EtaParams e;
  e.eta1 = s * th.theta1;
  e.eta2 = s * th.theta2;
  e.eta3 = th.theta3;
  e.z0 = z0;
  e.wind_scaled = th.wind_scaled;
  return e;
}

inline ThetaParams theta_from_eta(const EtaParams& e) {
  double s = std::exp(e.eta3 * e.z0);
  ThetaParams th;
  th.theta1 = s * e.eta1;
  th.theta2 = s * e.eta2;
  th.theta3 = e.eta3;
  th.wind_scaled = e.wind_scaled;
  return th;
}

/// Image G(theta) = exp(-theta3*z0)*(theta1, theta2, theta1*theta3, theta2*theta3).
inline GVector g_of_theta(const ThetaParams& th, double z0) {
  double s = std::exp(-th.theta3 * z0);
  return {s * th.theta1, s * th.theta2, s * th.theta1 * th.theta3, s * th.theta2 * th.theta3};
}

/// Same image expressed in eta: W(eta) = (eta1, eta2, eta1*eta3, eta2*eta3).
inline GVector w_of_eta(const EtaParams& e) {
  return {e.eta1, e.eta2, e.eta1 * e.eta3, e.eta2 * e.eta3};
}

inline GVector w_of_eta(const Vec3& e) {
  return {e[0], e[1], e[0] * e[2], e[1] * e[2]};
}

/// Structural identity of the image: G1*G4 - G2*G3 = 0.
inline double g_consistency(const GVector& g) { return g[0] * g[3] - g[1] * g[2]; }

/// Jacobian of w_of_eta: rows (1,0,0), (0,1,0), (eta3,0,eta1), (0,eta3,eta2).
inline Mat43 w_jacobian(const Vec3& e) {
  Mat43 jac;
  jac << 1, 0, 0,
         0, 1, 0,
         e[2], 0, e[0],
         0, e[2], e[1];
  return jac;
}

/// Selector matrix of the mixed update; alpha is its only free entry.
inline Mat34 t_matrix(double alpha) {
  Mat34 t = Mat34::Zero();
  t(0, 0) = alpha;
  t(1, 1) = alpha;
  t(2, 3) = 1.0;
  return t;
}

/// T*W(eta) = (alpha*eta1, alpha*eta2, eta2*eta3); the map whose strict
/// monotonicity the margin below certifies.
inline Vec3 t_times_w(const Vec3& e, double alpha) {
  return {alpha * e[0], alpha * e[1], e[1] * e[2]};
}

/// Threshold on alpha above which T*W(eta) is strictly monotone: alpha > eta3^2/(4*eta2).
inline double alpha_lower_bound(const EtaParams& e) {
  require(e.eta2 > 0, "alpha_lower_bound: eta2 must be positive");
  return 0.25 * e.eta3 * e.eta3 / e.eta2;
}

inline double alpha_lower_bound(const Vec3& e) {
  require(e[1] > 0, "alpha_lower_bound: eta2 must be positive");
  return 0.25 * e[2] * e[2] / e[1];
}

/// The same threshold written in physical curve parameters:
///   (J/(4*kappa*v_w)) * c3^2 * exp(c3*v_w/omega0) / (c1*c2),
/// with the v_w factor dropped when wind_scaled = false. Agrees with
/// alpha_lower_bound(eta) for eta derived from the same (c, v_w, omega0).
inline double alpha_lower_bound_physical(const CpParams& c, const PhysicalParams& phys,
                                         double v_w, double omega0, bool wind_scaled = true) {
  require(v_w > 0 && omega0 > 0, "alpha_lower_bound_physical: v_w and omega0 must be positive");
  double z0 = v_w / omega0;
  double scale = phys.inertia / (4.0 * phys.kappa * (wind_scaled ? v_w : 1.0));
  return scale * c.c3 * c.c3 * std::exp(c.c3 * z0) / (c.c1 * c.c2);
}

/// Strict-monotonicity margin of T*W at eta for a given alpha: the smallest
/// eigenvalue of the symmetrized Jacobian product
///   [[2a, 0, 0], [0, 2a, eta3], [0, eta3, 2*eta2]],
/// in closed form min(2a, (a + eta2) - sqrt((a - eta2)^2 + eta3^2)).
/// Positive exactly when alpha > alpha_lower_bound(eta).
inline double monotonicity_margin(const Vec3& e, double alpha) {
  double a = alpha, b = e[1], g = e[2];
  double low = (a + b) - std::sqrt((a - b) * (a - b) + g * g);
  return std::min(2.0 * a, low);
}

inline double monotonicity_margin(const EtaParams& e, double alpha) {
  return monotonicity_margin(Vec3{e.eta1, e.eta2, e.eta3}, alpha);
}

}  // namespace cpest
