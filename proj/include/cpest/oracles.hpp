#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cpest/parameter_maps.hpp"
#include "cpest/plant.hpp"
#include "cpest/power_curve.hpp"

namespace cpest {

/// Outcome of one independent cross-check, as produced by the verification
/// command and the test suite.
struct OracleReport {
  std::string name;
  double max_residual = 0;
  double tolerance = 0;
  bool passed = false;
  double ms = 0;
  std::string metadata;
};

/// Maximizer of the reduced power curve over a uniform n-point grid on
/// [z_lo, z_hi]. Deliberately avoids the closed-form optimum so it can serve
/// as its cross-check; accurate to one grid step.
inline double grid_argmax_cp(const CpParams& c, double z_lo, double z_hi, int n) {
  require(z_hi > z_lo && z_lo > 0 && n >= 3, "grid_argmax_cp: bad search interval");
  double best_z = z_lo, best_v = cp_reduced(z_lo, c);
  for (int i = 1; i < n; ++i) {
    double z = z_lo + (z_hi - z_lo) * static_cast<double>(i) / (n - 1);
    double v = cp_reduced(z, c);
    if (v > best_v) {
      best_v = v;
      best_z = z;
    }
  }
  return best_z;
}

/// Reference trajectory for step-size cross-checks: the same integrator run at
/// one sixteenth of the step, recorded on the caller's stride.
inline PlantTrajectory reference_trajectory(double omega0, const WindProfile& wind,
                                            const TorqueProfile& torque,
                                            const PhysicalParams& phys, const CpParams& c,
                                            double h, double t_f, double stride) {
  return simulate(omega0, wind, torque, phys, c, h / 16.0, t_f, stride);
}

/// Central-difference Jacobian with relative step 1e-6 (absolute near zero).
inline Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double rel_step = 1e-6) {
  Eigen::VectorXd fx = f(x);
  Eigen::MatrixXd jac(fx.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double step = rel_step * std::max(std::abs(x[j]), 1.0);
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * step);
  }
  return jac;
}

/// Generic recursive cofactor determinant for dynamic matrices. Slow by design;
/// exists as an independent route against the fixed-size expansions.
inline double recursive_determinant(const Eigen::MatrixXd& m) {
  Eigen::Index n = m.rows();
  require(n == m.cols() && n >= 1, "recursive_determinant: square matrix required");
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  double det = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::MatrixXd sub(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r) {
      Eigen::Index cc = 0;
      for (Eigen::Index col = 0; col < n; ++col) {
        if (col == j) continue;
        sub(r - 1, cc++) = m(r, col);
      }
    }
    double sign = (j % 2 == 0) ? 1.0 : -1.0;
    det += sign * m(0, j) * recursive_determinant(sub);
  }
  return det;
}

/// Generic adjugate via recursive minors; adj(M)*M = det(M)*I for any square M.
inline Eigen::MatrixXd recursive_adjugate(const Eigen::MatrixXd& m) {
  Eigen::Index n = m.rows();
  require(n == m.cols() && n >= 2, "recursive_adjugate: square matrix required");
  Eigen::MatrixXd adj(n, n);
  Eigen::MatrixXd sub(n - 1, n - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index rr = 0;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == i) continue;
        Eigen::Index cc = 0;
        for (Eigen::Index col = 0; col < n; ++col) {
          if (col == j) continue;
          sub(rr, cc++) = m(r, col);
        }
        ++rr;
      }
      double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      adj(j, i) = sign * recursive_determinant(sub);
    }
  }
  return adj;
}

/// Convergence margin recomputed spectrally: twice the smallest eigenvalue of
/// the symmetric part of T(alpha) * dW/deta. Independent of the closed form.
inline double monotonicity_margin_spectral(const Vec3& eta, double alpha) {
  Mat3 m = t_matrix(alpha) * w_jacobian(eta);
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
  return 2.0 * es.eigenvalues()(0);
}

}  // namespace cpest
