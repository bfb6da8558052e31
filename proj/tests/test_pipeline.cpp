#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cpest/pipeline.hpp"

using namespace cpest;

namespace {
ScenarioConfig short_cfg(const std::string& scenario, double t_f) {
  auto cfg = default_config(scenario);
  cfg.integration.t_f = t_f;
  return cfg;
}
}  // namespace

TEST_CASE("constant-wind run: exactness and filter invariants", "[pipeline]") {
  auto result = run_pipeline(short_cfg("S1", 60.0));
  REQUIRE_FALSE(result.aborted);
  REQUIRE(result.records.size() == 601);

  // The regression equation holds to integration accuracy from t = 0.
  CHECK(result.nlpre_max < 1e-6);
  CHECK(result.key_identity_max < 1e-8);
  // Estimation-error transfer through the information matrix.
  CHECK(result.wt_identity_max < 1e-6);
  // Adjugate defining identity along the run.
  CHECK(result.adj_identity_max < 1e-10);

  const auto& first = result.records.front();
  CHECK(first.t == 0.0);
  CHECK(first.Delta == 0.0);
  CHECK(first.z == Catch::Approx(0.9).epsilon(1e-14));
  CHECK(first.lambda_max_F == Catch::Approx(1.0).epsilon(1e-12));
  CHECK((first.eta_hat - 0.5 * result.truth.eta).norm() < 1e-14);

  double delta_prev = -1.0, lmax_prev = 2.0, u_prev = std::numeric_limits<double>::infinity();
  for (const auto& r : result.records) {
    CHECK(r.Delta >= delta_prev - 1e-10);
    CHECK(r.Delta >= 0.0);
    CHECK(r.Delta < 1.0);
    CHECK(r.lambda_max_F <= lmax_prev + 1e-12);
    CHECK(r.lambda_min_F > 0.0);
    CHECK(r.u_lyap <= u_prev * (1.0 + 1e-9) + 1e-18);
    delta_prev = r.Delta;
    lmax_prev = r.lambda_max_F;
    u_prev = r.u_lyap;
  }

  // Excitation has accumulated and the estimate is moving the right way.
  const auto& last = result.records.back();
  CHECK(last.Delta > 0.1);
  CHECK(last.eta_err < first.eta_err);
  CHECK(result.max_substeps >= 1);
}

TEST_CASE("degenerate horizon", "[pipeline]") {
  auto result = run_pipeline(short_cfg("S1", 0.0));
  CHECK_FALSE(result.aborted);
  CHECK(result.records.empty());
}

TEST_CASE("truth block is internally consistent", "[pipeline]") {
  auto cfg = short_cfg("S1", 1.0);
  auto result = run_pipeline(cfg);
  const auto& truth = result.truth;
  CHECK(truth.z0_drive == Catch::Approx(0.9).epsilon(1e-14));
  CHECK(truth.v_w_nominal == 9.0);
  CHECK(truth.wind_scaled);
  CHECK(truth.z_star == Catch::Approx(z_star(truth.c)).epsilon(1e-14));
  auto e = eta_from_theta(truth.theta, truth.z0_drive);
  CHECK((truth.eta - Vec3{e.eta1, e.eta2, e.eta3}).norm() < 1e-15);
  CHECK((truth.g - w_of_eta(truth.eta)).norm() < 1e-15);
}

TEST_CASE("noiseless runs are bitwise deterministic", "[pipeline]") {
  auto a = run_pipeline(short_cfg("S1", 5.0));
  auto b = run_pipeline(short_cfg("S1", 5.0));
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].z == b.records[i].z);
    CHECK(a.records[i].Delta == b.records[i].Delta);
    CHECK((a.records[i].eta_hat - b.records[i].eta_hat).norm() == 0.0);
  }
}

TEST_CASE("noisy runs: seed determinism and seed sensitivity", "[pipeline]") {
  auto cfg = short_cfg("S1-noise", 5.0);
  auto a = run_pipeline(cfg);
  auto b = run_pipeline(cfg);
  REQUIRE_FALSE(a.aborted);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].y1 == b.records[i].y1);
    CHECK((a.records[i].W_hat - b.records[i].W_hat).norm() == 0.0);
  }

  auto cfg2 = cfg;
  cfg2.noise.seed = cfg.noise.seed + 1;
  auto c = run_pipeline(cfg2);
  double diff = 0;
  for (size_t i = 0; i < a.records.size(); ++i)
    diff = std::max(diff, (a.records[i].W_hat - c.records[i].W_hat).norm());
  CHECK(diff > 0.0);

  // The measured initial ratio, not the true one, seeds the filters.
  CHECK(a.truth.z0_drive != Catch::Approx(0.9).margin(1e-12));
}

TEST_CASE("noise leaves the plant truth untouched", "[pipeline]") {
  // Measurement noise corrupts the regressor drive only: the recorded state
  // trajectory matches the noiseless run exactly.
  auto clean = run_pipeline(short_cfg("S1", 5.0));
  auto noisy = run_pipeline(short_cfg("S1-noise", 5.0));
  REQUIRE(clean.records.size() == noisy.records.size());
  for (size_t i = 0; i < clean.records.size(); ++i) {
    CHECK(noisy.records[i].omega == Catch::Approx(clean.records[i].omega).epsilon(1e-14));
    CHECK(noisy.records[i].z == Catch::Approx(clean.records[i].z).epsilon(1e-14));
  }
  // And the regression residual is no longer tiny.
  CHECK(noisy.nlpre_max > 1e-4);
  CHECK(clean.nlpre_max < 1e-6);
}

TEST_CASE("varying-wind run: exactness under the wind weight", "[pipeline]") {
  auto result = run_pipeline(short_cfg("S2", 60.0));
  REQUIRE_FALSE(result.aborted);
  CHECK_FALSE(result.truth.wind_scaled);
  CHECK(result.nlpre_max < 1e-6);
  CHECK(result.key_identity_max < 1e-8);
  for (const auto& r : result.records) {
    CHECK(r.Delta >= 0.0);
    CHECK(r.lambda_min_F > 0.0);
  }
  // The wind varies over the run and the load torque tracks it.
  bool torque_moves = false;
  for (const auto& r : result.records) torque_moves = torque_moves || std::abs(r.te) > 1e-6;
  CHECK(torque_moves);
}

TEST_CASE("small constant load perturbs the regression equation linearly", "[pipeline]") {
  auto base = short_cfg("S1-smallTe", 40.0);
  base.torque.magnitude = 0.01 * base.inertia;
  auto lo = run_pipeline(base);
  base.torque.magnitude = 0.02 * base.inertia;
  auto hi = run_pipeline(base);
  REQUIRE_FALSE(lo.aborted);
  REQUIRE_FALSE(hi.aborted);
  CHECK(lo.nlpre_max > 1e-6);
  double ratio = hi.nlpre_max / lo.nlpre_max;
  CHECK(ratio > 1.0);
  CHECK(ratio < 4.0);
}

TEST_CASE("frozen mixing keeps the initial estimate", "[pipeline]") {
  auto result = run_pipeline(short_cfg("baseline-overparam", 10.0));
  REQUIRE_FALSE(result.aborted);
  const auto& first = result.records.front();
  for (const auto& r : result.records) {
    CHECK((r.eta_hat - first.eta_hat).norm() == 0.0);
    CHECK(r.substeps == 0);
  }
  // The least-squares stage still learns.
  CHECK(result.records.back().W_err < first.W_err);
}

TEST_CASE("per-record diagnostics agree with their definitions", "[pipeline]") {
  auto cfg = short_cfg("S1", 20.0);
  auto result = run_pipeline(cfg);
  auto gains = cfg.estimator_gains();
  for (size_t i = 0; i < result.records.size(); i += 50) {
    const auto& r = result.records[i];
    CHECK(r.eta_err == Catch::Approx((r.eta_hat - result.truth.eta).norm()).margin(1e-13));
    Vec3 d = r.eta_hat - result.truth.eta;
    double u = 0.5 * d.dot(gains.gamma.inverse() * d);
    CHECK(r.u_lyap == Catch::Approx(u).epsilon(1e-10));
    Vec3 e = (Vec3(r.c_hat) - Vec3{result.truth.c.c1, result.truth.c.c2, result.truth.c.c3});
    CHECK(r.e_tilde[0] == Catch::Approx(std::abs(e[0]) / result.truth.c.c1).margin(1e-12));
    CHECK(r.e_tilde[2] == Catch::Approx(std::abs(e[2]) / result.truth.c.c3).margin(1e-12));
    CHECK(r.z == Catch::Approx(r.v_w / r.omega).epsilon(1e-14));
  }
}
