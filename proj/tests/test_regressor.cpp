#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cpest/parameter_maps.hpp"
#include "cpest/regressor.hpp"
#include "cpest/rng.hpp"

using namespace cpest;

TEST_CASE("algebraic auxiliary signal", "[regressor]") {
  CHECK(xi3_of(1.0) == -0.5);
  CHECK(xi3_of(0.5) == -2.0);
  CHECK(xi3_of(2.0) == -0.125);
  CHECK_THROWS_AS(xi3_of(0.0), std::invalid_argument);
  CHECK_THROWS_AS(xi3_of(-1.0), std::invalid_argument);
}

TEST_CASE("initialization: matched filters, zero everything else", "[regressor]") {
  XiState xi;
  FilterBank bank;
  init_regressor(0.9, 1.0, xi, bank);
  CHECK(xi.xi1 == 0.0);
  CHECK(xi.xi2 == 0.0);
  CHECK(bank.fz_match == 0.9);
  CHECK(bank.fxi3_match == xi3_of(0.9));
  CHECK(bank.fz == 0.0);
  CHECK(bank.fw == 0.0);
  CHECK(bank.rate_z(0.9) == 0.0);
  CHECK(bank.rate_xi3(0.9) == 0.0);

  // Both measurable outputs and the whole regressor matrix start at zero.
  auto s = emit_sample(xi, bank, 0.9, 1.0, 0.0);
  CHECK(s.y.norm() == 0.0);
  CHECK(s.phi.norm() == 0.0);

  CHECK_THROWS_AS(init_regressor(0.0, 1.0, xi, bank), std::invalid_argument);
  CHECK_THROWS_AS(init_regressor(0.9, 0.0, xi, bank), std::invalid_argument);
}

TEST_CASE("low-pass step response", "[regressor]") {
  // Constant weight w = 1 drives fw as a unit step: fw(t) = 1 - exp(-sigma*t).
  XiState xi;
  FilterBank bank;
  init_regressor(0.9, 1.0, xi, bank);
  double h = 1e-3;
  for (int i = 1; i <= 5000; ++i) {
    advance(xi, bank, 0.9, 1.0, h);
    double t = h * i;
    CHECK(std::abs(bank.fw - (1.0 - std::exp(-t))) < 1e-6);
  }
}

TEST_CASE("holding z constant", "[regressor]") {
  // At constant z the matched filters never move, so both outputs stay zero
  // and the integrators grow linearly: xi1 = -z^4 t, xi2 = z^3 t.
  XiState xi;
  FilterBank bank;
  double zbar = 0.5;
  init_regressor(zbar, 1.0, xi, bank);
  double h = 1e-3;
  int n = 2000;
  for (int i = 0; i < n; ++i) advance(xi, bank, zbar, 1.0, h);
  double t = h * n;
  CHECK(std::abs(bank.rate_z(zbar)) < 1e-15);
  CHECK(std::abs(bank.rate_xi3(zbar)) < 1e-15);
  CHECK(xi.xi1 == Catch::Approx(-0.0625 * t).epsilon(1e-12));
  CHECK(xi.xi2 == Catch::Approx(0.125 * t).epsilon(1e-12));
  auto s = emit_sample(xi, bank, zbar, 1.0, t);
  CHECK(s.y.norm() == 0.0);
  // The rate-driven convolution columns stay at zero as well.
  CHECK(s.phi(0, 2) == 0.0);
  CHECK(s.phi(1, 3) == 0.0);
}

TEST_CASE("states are linear in the weight", "[regressor]") {
  // With the same z path, doubling w doubles every weighted state exactly
  // (2x is a power of two, so the scaling is bitwise) and leaves the matched
  // filters untouched.
  XiState xa, xb;
  FilterBank ba, bb;
  init_regressor(0.9, 1.0, xa, ba);
  init_regressor(0.9, 1.0, xb, bb);
  SplitMix64 rng(3);
  for (int i = 0; i < 500; ++i) {
    double z = 0.3 + 0.6 * rng.next_u01();
    advance(xa, ba, z, 1.0, 1e-3);
    advance(xb, bb, z, 2.0, 1e-3);
  }
  CHECK(xb.xi1 == 2.0 * xa.xi1);
  CHECK(xb.xi2 == 2.0 * xa.xi2);
  CHECK(bb.fz4 == 2.0 * ba.fz4);
  CHECK(bb.fw == 2.0 * ba.fw);
  CHECK(bb.conv_z4_rz == 2.0 * ba.conv_z4_rz);
  CHECK(bb.fz_match == ba.fz_match);
  CHECK(bb.fxi3_match == ba.fxi3_match);
}

TEST_CASE("integrator monotonicity", "[regressor]") {
  // xi1 strictly decreases and xi2 strictly increases whenever z > 0.
  XiState xi;
  FilterBank bank;
  init_regressor(0.9, 1.0, xi, bank);
  SplitMix64 rng(4);
  double prev1 = 0.0, prev2 = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double z = 0.1 + 0.8 * rng.next_u01();
    advance(xi, bank, z, 1.0, 1e-3);
    CHECK(xi.xi1 < prev1);
    CHECK(xi.xi2 > prev2);
    prev1 = xi.xi1;
    prev2 = xi.xi2;
  }
}

TEST_CASE("sample assembly from the filter states", "[regressor]") {
  // Each regressor entry is a fixed combination of the states; sentinel values
  // expose transposed or mis-signed entries.
  FilterBank bank;
  bank.sigma = 2.0;
  bank.fz_match = 0.4;
  bank.fz = 11.0;
  bank.fz3 = 13.0;
  bank.fz4 = 17.0;
  bank.fw = 19.0;
  bank.fxi3_match = -3.0;
  bank.conv_z4_rz = 23.0;
  bank.conv_z3_rz = 29.0;
  bank.conv_z4_rx = 31.0;
  bank.conv_z3_rx = 37.0;
  XiState xi{5.0, 7.0};
  double z = 0.5;
  double rz = 2.0 * (0.5 - 0.4);
  double rx = 2.0 * (xi3_of(0.5) - (-3.0));
  auto s = emit_sample(xi, bank, z, 1.0, 1.5);
  CHECK(s.t == 1.5);
  CHECK(s.y(0) == Catch::Approx(rz).epsilon(1e-15));
  CHECK(s.y(1) == Catch::Approx(rx).epsilon(1e-15));
  CHECK(s.phi(0, 0) == -17.0);
  CHECK(s.phi(0, 1) == 13.0);
  CHECK(s.phi(0, 2) == Catch::Approx(-5.0 * rz - 23.0).epsilon(1e-15));
  CHECK(s.phi(0, 3) == Catch::Approx(-7.0 * rz + 29.0).epsilon(1e-15));
  CHECK(s.phi(1, 0) == -11.0);
  CHECK(s.phi(1, 1) == 19.0);
  CHECK(s.phi(1, 2) == Catch::Approx(-5.0 * rx - 31.0).epsilon(1e-15));
  CHECK(s.phi(1, 3) == Catch::Approx(-7.0 * rx + 37.0).epsilon(1e-15));
}

TEST_CASE("interval excitation index", "[regressor]") {
  std::vector<RegressorSample> empty;
  CHECK_THROWS_AS(ie_index(empty), std::invalid_argument);

  // All-zero regressors carry no excitation.
  std::vector<RegressorSample> zeros(5);
  for (size_t i = 0; i < zeros.size(); ++i) zeros[i].t = 0.1 * static_cast<double>(i);
  CHECK(ie_index(zeros) == 0.0);

  // A varying trajectory over a short window is already informative.
  XiState xi;
  FilterBank bank;
  init_regressor(0.9, 1.0, xi, bank);
  std::vector<RegressorSample> run;
  double h = 1e-3, z = 0.9;
  for (int i = 0; i <= 10000; ++i) {
    double t = h * i;
    z = 0.5 + 0.4 * std::cos(0.7 * t);
    if (i % 100 == 0) run.push_back(emit_sample(xi, bank, z, 1.0, t));
    advance(xi, bank, z, 1.0, h);
  }
  CHECK(ie_index(run) > 0.0);
  CHECK(ie_index(std::span<const RegressorSample>(run).first(2)) >= -1e-12);
}

TEST_CASE("swapping residual", "[regressor]") {
  auto one = [](double) { return 1.0; };
  auto zero = [](double) { return 0.0; };
  auto u = [](double t) { return std::sin(t); };
  auto udot = [](double t) { return std::cos(t); };

  // Constant x: both routes compute the same filter exactly.
  CHECK(swapping_residual(one, zero, u, udot, 1.0, 1e-3, 10.0) < 1e-9);

  // Constant u: both sides are identically zero.
  auto id = [](double t) { return t; };
  CHECK(swapping_residual(id, one, one, zero, 1.0, 1e-3, 10.0) < 1e-12);

  // Genuinely time-varying pair stays within the discretization error.
  CHECK(swapping_residual(id, one, u, udot, 1.0, 1e-3, 10.0) < 1e-5);
}

TEST_CASE("identity residual along synthetic trajectories", "[regressor]") {
  auto phys = PhysicalParams::from_rho_r_inertia(1.225, 1.84, 7.856);
  auto th = theta_from_c(c_from_kappas(HeierCoefficients{}, 1.84), phys, 9.0);
  // Holding z at the equilibrium theta2/theta1 zeroes every term exactly.
  size_t n = 50;
  double z_eq = th.theta2 / th.theta1;
  std::vector<double> t(n), z(n, z_eq), zdot(n, 0.0), xi1(n), xi2(n), w(n, 1.0);
  for (size_t i = 0; i < n; ++i) {
    t[i] = 0.1 * static_cast<double>(i);
    xi1[i] = -std::pow(z_eq, 4) * t[i];
    xi2[i] = std::pow(z_eq, 3) * t[i];
  }
  CHECK(key_identity_residual(z, zdot, xi1, xi2, w, {}, th, z_eq) < 1e-12);
}
