#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cpest {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

/// Coefficients of the general curve-fit power-coefficient formula
///   Cp(lambda, beta) = kappa1*(kappa2/lambda_i - kappa3*beta - kappa4*beta^ell - kappa5)*exp(-kappa6/lambda_i)
///   1/lambda_i = 1/(lambda + 0.08*beta) - kappa7/(beta^3 + 1)
/// kappa3, kappa4 and ell only matter off the beta = 0 slice; their defaults are
/// placeholders that never influence beta = 0 results.
struct HeierCoefficients {
  double kappa1 = 0.5;
  double kappa2 = 116.0;
  double kappa3 = 0.4;
  double kappa4 = 0.0;
  double kappa5 = 5.0;
  double kappa6 = 21.0;
  double kappa7 = 0.035;
  double ell = 2.0;   ///< exponent of the beta^ell term
  bool beta_in_degrees = true;  ///< pitch-unit convention of the fit this kappa set came from

  void validate() const {
    require(kappa1 > 0 && kappa2 > 0 && kappa5 > 0 && kappa6 > 0 && kappa7 > 0,
            "HeierCoefficients: kappa1, kappa2, kappa5, kappa6, kappa7 must be positive");
    require(kappa3 >= 0 && kappa4 >= 0, "HeierCoefficients: kappa3, kappa4 must be nonnegative");
  }
};

/// Swept rotor area for blade length r: a disc of radius r.
inline double swept_area(double r) {
  require(r > 0, "swept_area: blade length must be positive");
  return std::numbers::pi * r * r;
}

/// Physical turbine constants. kappa aggregates (1/2)*rho*area and must stay
/// consistent with rho and area; build instances through from_rho_r_inertia.
struct PhysicalParams {
  double rho = 1.225;    ///< air density (kg/m^3)
  double r = 1.84;       ///< blade length (m)
  double inertia = 7.856;///< rotor inertia J (kg*m^2)
  double area = swept_area(1.84);
  double kappa = 0.5 * 1.225 * swept_area(1.84);

  static PhysicalParams from_rho_r_inertia(double rho, double r, double inertia) {
    PhysicalParams p;
    p.rho = rho;
    p.r = r;
    p.inertia = inertia;
    p.area = swept_area(r);
    p.kappa = 0.5 * rho * p.area;
    p.validate();
    return p;
  }

  void validate() const {
    require(rho > 0 && r > 0 && inertia > 0 && area > 0 && kappa > 0,
            "PhysicalParams: all fields must be positive");
    require(std::abs(kappa - 0.5 * rho * area) <= 1e-12 * kappa,
            "PhysicalParams: kappa must equal 0.5*rho*area");
  }
};

/// Parameters of the reduced power-coefficient curve Cp(z) = c1*(z - c2)*exp(-c3*z),
/// z := v_w / omega.
struct CpParams {
  double c1 = 0;
  double c2 = 0;
  double c3 = 0;

  void validate() const {
    require(c1 > 0 && c2 > 0 && c3 > 0, "CpParams: c1, c2, c3 must be positive");
  }
};

/// General-form power coefficient at tip-speed ratio lambda and pitch beta.
/// beta's unit follows k.beta_in_degrees; the beta = 0 slice is unit-agnostic.
inline double cp_general(double lambda, double beta, const HeierCoefficients& k) {
  double denom = lambda + 0.08 * beta;
  require(std::abs(denom) > 1e-300, "cp_general: lambda + 0.08*beta must be nonzero");
  double inv_li = 1.0 / denom - k.kappa7 / (beta * beta * beta + 1.0);
  double poly = k.kappa2 * inv_li - k.kappa3 * beta - k.kappa4 * std::pow(beta, k.ell) - k.kappa5;
  return k.kappa1 * poly * std::exp(-k.kappa6 * inv_li);
}

/// Reduced-form power coefficient at speed ratio z = v_w/omega.
inline double cp_reduced(double z, const CpParams& c) {
  return c.c1 * (z - c.c2) * std::exp(-c.c3 * z);
}

/// Collapse the general coefficients to the reduced three-parameter form at beta = 0:
///   c1 = (kappa1*kappa2/r)*exp(kappa6*kappa7), c2 = r*(kappa7 + kappa5/kappa2), c3 = kappa6/r.
inline CpParams c_from_kappas(const HeierCoefficients& k, double r) {
  k.validate();
  require(r > 0, "c_from_kappas: blade length must be positive");
  CpParams c;
  c.c1 = (k.kappa1 * k.kappa2 / r) * std::exp(k.kappa6 * k.kappa7);
  c.c2 = r * (k.kappa7 + k.kappa5 / k.kappa2);
  c.c3 = k.kappa6 / r;
  return c;
}

/// Location of the reduced curve's maximum: z* = (c2*c3 + 1)/c3.
inline double z_star(const CpParams& c) {
  require(c.c3 > 0, "z_star: c3 must be positive");
  return (c.c2 * c.c3 + 1.0) / c.c3;
}

/// Peak value Cp(z*) = (c1/c3)*exp(-(1 + c2*c3)).
inline double cp_peak(const CpParams& c) {
  require(c.c3 > 0, "cp_peak: c3 must be positive");
  return (c.c1 / c.c3) * std::exp(-(1.0 + c.c2 * c.c3));
}

/// Aerodynamic torque kappa*(v_w^3/omega)*Cp(v_w/omega) on the rotor.
inline double mechanical_torque(double omega, double v_w, const CpParams& c,
                                const PhysicalParams& phys) {
  require(omega > 0, "mechanical_torque: omega must be positive");
  double z = v_w / omega;
  return phys.kappa * (v_w * v_w * v_w / omega) * cp_reduced(z, c);
}

}  // namespace cpest
