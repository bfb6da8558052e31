#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cpest/parameter_maps.hpp"

namespace cpest {

/// Speed-ratio dynamics under constant wind with load torque folded into
/// tau = Te/(J*v_w):  dz/dt = -z^3*(theta1*z - theta2)*exp(-theta3*z) + z^2*tau.
/// Unique positive equilibrium at z = theta2/theta1 = c2 when tau = 0.
inline double z_dot_s1(double z, double tau, const ThetaParams& th) {
  double e = std::exp(-th.theta3 * z);
  return -z * z * z * (th.theta1 * z - th.theta2) * e + z * z * tau;
}

/// Speed-ratio dynamics under varying wind with the load torque chosen to cancel
/// the wind-rate term:  dz/dt = -v_w*z^3*(theta1*z - theta2)*exp(-theta3*z),
/// theta here being the wind-independent scaling (wind_scaled = false).
inline double z_dot_s2(double z, double v_w, const ThetaParams& th_bar) {
  double e = std::exp(-th_bar.theta3 * z);
  return -v_w * z * z * z * (th_bar.theta1 * z - th_bar.theta2) * e;
}

/// Torque-induced residual of the integral identity along a sampled trajectory:
///   tau_d(t) = tau*exp(theta3*z)*z^2 - theta3*zdot(t)*Int_0^t tau*exp(theta3*z)*z^2 ds,
/// with the integral accumulated by the trapezoidal rule over the given samples.
/// Identically zero when tau is identically zero.
inline std::vector<double> disturbance_tau_d(std::span<const double> t,
                                             std::span<const double> z,
                                             std::span<const double> zdot,
                                             std::span<const double> tau,
                                             const ThetaParams& th) {
  require(t.size() == z.size() && t.size() == zdot.size() && t.size() == tau.size(),
          "disturbance_tau_d: sample arrays must have equal length");
  std::vector<double> out(t.size());
  double integral = 0.0;
  double prev_integrand = 0.0;
  for (size_t i = 0; i < t.size(); ++i) {
    double integrand = tau[i] * std::exp(th.theta3 * z[i]) * z[i] * z[i];
    if (i > 0) integral += 0.5 * (integrand + prev_integrand) * (t[i] - t[i - 1]);
    out[i] = integrand - th.theta3 * zdot[i] * integral;
    prev_integrand = integrand;
  }
  return out;
}

}  // namespace cpest
