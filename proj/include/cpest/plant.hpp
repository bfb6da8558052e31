#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpest/power_curve.hpp"
#include "cpest/rng.hpp"

namespace cpest {

/// Thrown when a run leaves the numerically valid region (rotor-speed floor,
/// information matrix losing positive definiteness, substep budget exceeded).
struct NumericAbort : std::runtime_error {
  explicit NumericAbort(const std::string& what) : std::runtime_error(what) {}
};

/// Rotor-speed floor guarding the z = v_w/omega singularity.
inline constexpr double kOmegaFloor = 1e-6;

struct PlantState {
  double omega = 0;  ///< rotor speed (rad/s)
  double t = 0;      ///< time (s)
};

/// Wind-speed input v_w(t) with an exactly evaluable derivative.
struct WindProfile {
  enum class Kind { kConstant, kRampHold, kSinusoid };

  Kind kind = Kind::kConstant;
  double base = 9.0;       ///< m/s
  double amplitude = 0.0;  ///< ramp total rise or sinusoid amplitude (m/s)
  double frequency = 0.0;  ///< sinusoid angular frequency (rad/s)
  double ramp_start = 0.0; ///< s
  double ramp_duration = 1.0;  ///< s

  void validate() const {
    require(base > 0, "WindProfile: base wind speed must be positive");
    switch (kind) {
      case Kind::kConstant: break;
      case Kind::kRampHold:
        require(ramp_duration > 0, "WindProfile: ramp duration must be positive");
        require(base + amplitude > 0, "WindProfile: ramp must keep v_w positive");
        break;
      case Kind::kSinusoid:
        require(base - std::abs(amplitude) > 0, "WindProfile: sinusoid must keep v_w positive");
        break;
    }
  }

  double value(double t) const {
    switch (kind) {
      case Kind::kConstant: return base;
      case Kind::kRampHold: {
        if (t <= ramp_start) return base;
        if (t >= ramp_start + ramp_duration) return base + amplitude;
        return base + amplitude * (t - ramp_start) / ramp_duration;
      }
      case Kind::kSinusoid: return base + amplitude * std::sin(frequency * t);
    }
    return base;
  }

  double derivative(double t) const {
    switch (kind) {
      case Kind::kConstant: return 0.0;
      case Kind::kRampHold:
        return (t > ramp_start && t < ramp_start + ramp_duration) ? amplitude / ramp_duration
                                                                  : 0.0;
      case Kind::kSinusoid: return amplitude * frequency * std::cos(frequency * t);
    }
    return 0.0;
  }
};

/// Load (generator) torque input.
struct TorqueProfile {
  enum class Kind {
    kZero,         ///< open-circuit operation, Te = 0
    kWindCoupled,  ///< Te = -J*(dv_w/dt / v_w)*omega, cancels the wind-rate term of dz/dt
    kConstant      ///< small constant disturbance torque
  };

  Kind kind = Kind::kZero;
  double magnitude = 0.0;  ///< N*m, used by kConstant

  double value(double t, double omega, const WindProfile& wind,
               const PhysicalParams& phys) const {
    switch (kind) {
      case Kind::kZero: return 0.0;
      case Kind::kWindCoupled:
        return -phys.inertia * (wind.derivative(t) / wind.value(t)) * omega;
      case Kind::kConstant: return magnitude;
    }
    return 0.0;
  }
};

/// Measurement-noise description: independent symmetric uniform draws per channel.
struct NoiseSpec {
  double wind_amplitude = 0.0;   ///< m/s
  double rotor_amplitude = 0.0;  ///< rad/s
  std::uint64_t seed = 1;

  void validate() const {
    require(wind_amplitude >= 0 && rotor_amplitude >= 0,
            "NoiseSpec: amplitudes must be nonnegative");
  }
  bool enabled() const { return wind_amplitude > 0 || rotor_amplitude > 0; }
};

struct Measurement {
  double omega_meas = 0;
  double v_w_meas = 0;
};

/// Truth plus one uniform draw per channel; wind is drawn first, then rotor speed,
/// so a fixed seed fixes the whole measurement stream.
inline Measurement measure(const PlantState& state, double v_w_true, const NoiseSpec& noise,
                           SplitMix64& rng) {
  Measurement m;
  m.v_w_meas = v_w_true + rng.next_symmetric(noise.wind_amplitude);
  m.omega_meas = state.omega + rng.next_symmetric(noise.rotor_amplitude);
  return m;
}

inline double rotor_acceleration(double t, double omega, const WindProfile& wind,
                                 const TorqueProfile& torque, const PhysicalParams& phys,
                                 const CpParams& c) {
  if (omega < kOmegaFloor)
    throw NumericAbort("plant: omega fell below floor " + std::to_string(kOmegaFloor) +
                       " at t = " + std::to_string(t));
  double v_w = wind.value(t);
  double tm = mechanical_torque(omega, v_w, c, phys);
  double te = torque.value(t, omega, wind, phys);
  return (tm - te) / phys.inertia;
}

/// One classical 4th-order step of J*domega/dt = Tm - Te.
inline PlantState step(const PlantState& state, const WindProfile& wind,
                       const TorqueProfile& torque, const PhysicalParams& phys,
                       const CpParams& c, double h) {
  require(h > 0, "step: step size must be positive");
  double t = state.t, om = state.omega;
  double k1 = rotor_acceleration(t, om, wind, torque, phys, c);
  double k2 = rotor_acceleration(t + 0.5 * h, om + 0.5 * h * k1, wind, torque, phys, c);
  double k3 = rotor_acceleration(t + 0.5 * h, om + 0.5 * h * k2, wind, torque, phys, c);
  double k4 = rotor_acceleration(t + h, om + h * k3, wind, torque, phys, c);
  PlantState next;
  next.omega = om + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next.t = t + h;
  if (next.omega < kOmegaFloor)
    throw NumericAbort("plant: omega fell below floor at t = " + std::to_string(next.t));
  return next;
}

/// Sampled plant run. zdot is evaluated from the vector field
/// (dv_w/dt)/omega - z*(domega/dt)/omega, never by differencing.
struct PlantTrajectory {
  std::vector<double> t, omega, v_w, te, z, zdot;

  size_t size() const { return t.size(); }
};

/// Integrate the plant for t_f seconds at step h, recording every `stride` seconds.
/// t_f = 0 yields an empty trajectory.
inline PlantTrajectory simulate(double omega0, const WindProfile& wind,
                                const TorqueProfile& torque, const PhysicalParams& phys,
                                const CpParams& c, double h, double t_f, double stride) {
  require(omega0 > 0, "simulate: omega0 must be positive");
  require(h > 0 && stride > 0, "simulate: h and stride must be positive");
  require(t_f >= 0, "simulate: t_f must be nonnegative");
  wind.validate();
  PlantTrajectory traj;
  if (t_f == 0) return traj;
  auto n_steps = static_cast<long>(std::llround(t_f / h));
  auto record_every = static_cast<long>(std::llround(stride / h));
  require(record_every >= 1 && std::abs(stride - static_cast<double>(record_every) * h) <
                                   1e-9 * stride,
          "simulate: stride must be an integer multiple of h");
  PlantState s{omega0, 0.0};
  for (long i = 0; i <= n_steps; ++i) {
    if (i % record_every == 0) {
      double vw = wind.value(s.t);
      double z = vw / s.omega;
      double omdot = rotor_acceleration(s.t, s.omega, wind, torque, phys, c);
      traj.t.push_back(s.t);
      traj.omega.push_back(s.omega);
      traj.v_w.push_back(vw);
      traj.te.push_back(torque.value(s.t, s.omega, wind, phys));
      traj.z.push_back(z);
      traj.zdot.push_back(wind.derivative(s.t) / s.omega - z * omdot / s.omega);
    }
    if (i < n_steps) s = step(s, wind, torque, phys, c, h);
  }
  return traj;
}

}  // namespace cpest
