#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cpest/harness.hpp"

using namespace cpest;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cpest-test-" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    rows.push_back(fields);
  }
  return rows;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig tiny_cfg(const std::string& scenario, double t_f) {
  auto cfg = default_config(scenario);
  cfg.integration.t_f = t_f;
  return cfg;
}

}  // namespace

TEST_CASE("csv writer: exact text round-trip", "[harness]") {
  TempDir tmp("csv");
  auto p = tmp.path / "vals.csv";
  {
    CsvWriter csv(p.string(), {"a", "b", "c", "d"});
    double row[] = {3.141592653589793, 1.0 / 3.0, 1e-300, 123456789.123456789};
    csv.row(row);
    csv.close();
  }
  auto rows = read_csv(p);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b", "c", "d"});
  REQUIRE(rows[1].size() == 4);
  CHECK(std::strtod(rows[1][0].c_str(), nullptr) == 3.141592653589793);
  CHECK(std::strtod(rows[1][1].c_str(), nullptr) == 1.0 / 3.0);
  CHECK(std::strtod(rows[1][2].c_str(), nullptr) == 1e-300);
  CHECK(std::strtod(rows[1][3].c_str(), nullptr) == 123456789.123456789);

  CsvWriter csv2((tmp.path / "w.csv").string(), {"x"});
  double bad[] = {1.0, 2.0};
  CHECK_THROWS_AS(csv2.row(bad), std::runtime_error);
}

TEST_CASE("log-error slope fit on synthetic decay", "[harness]") {
  std::vector<RunRecord> records;
  for (int i = 0; i <= 40; ++i) {
    RunRecord r;
    r.t = 0.5 * i;
    r.Delta = 0.4 * std::min(1.0, r.t / 10.0);
    r.eta_err = std::exp(-0.5 * r.t);
    records.push_back(r);
  }
  auto fit = fit_log_error_slope(records);
  CHECK(fit.slope == Catch::Approx(-0.5).margin(1e-12));
  CHECK(fit.r2 > 1.0 - 1e-12);
  // Fit starts where Delta first reaches 10% of its final value.
  CHECK(fit.t_start >= 0.9);
  CHECK(fit.t_start <= 1.6);
  CHECK(fit.n >= 35);

  std::vector<RunRecord> empty;
  auto none = fit_log_error_slope(empty);
  CHECK(none.n == 0);
}

TEST_CASE("curve table", "[harness]") {
  TempDir tmp("curve");
  auto c_true = c_from_kappas(HeierCoefficients{}, 1.84);

  // Identical estimate: the two value columns agree textually.
  auto p1 = tmp.path / "same.csv";
  emit_cp_curve(c_true, c_true, nullptr, 0.05, 0.5, 21, p1.string());
  auto rows = read_csv(p1);
  REQUIRE(rows.size() == 22);
  CHECK(rows[0] == std::vector<std::string>{"z", "Cp_true", "Cp_hat"});
  for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][1] == rows[i][2]);

  // Single-point grid degenerates to one row at z_lo.
  auto p2 = tmp.path / "one.csv";
  emit_cp_curve(c_true, c_true, nullptr, 0.23, 0.5, 1, p2.string());
  auto one = read_csv(p2);
  REQUIRE(one.size() == 2);
  CHECK(std::strtod(one[1][0].c_str(), nullptr) == 0.23);

  // Initial-estimate column appears only when provided.
  CpParams init{30.0, 0.2, 9.0};
  auto p3 = tmp.path / "init.csv";
  emit_cp_curve(c_true, c_true, &init, 0.05, 0.5, 5, p3.string());
  auto with_init = read_csv(p3);
  CHECK(with_init[0].size() == 4);
  CHECK(with_init[0][3] == "Cp_init");

  CHECK_THROWS_AS(emit_cp_curve(c_true, c_true, nullptr, 0.0, 0.5, 5, (tmp.path / "x").string()),
                  std::invalid_argument);
}

TEST_CASE("experiment artifacts", "[harness]") {
  TempDir tmp("exp");
  auto cfg = tiny_cfg("S1", 2.0);
  auto art = run_experiment(cfg, tmp.path.string());
  CHECK(art.dir == (tmp.path / "S1").string());
  CHECK(fs::exists(fs::path(art.dir) / "run.csv"));
  CHECK(fs::exists(fs::path(art.dir) / "cp_curve.csv"));
  CHECK(fs::exists(fs::path(art.dir) / "summary.json"));

  auto rows = read_csv(fs::path(art.dir) / "run.csv");
  CHECK(rows.size() == art.result.records.size() + 1);
  REQUIRE(rows[0].size() == 32);
  CHECK(rows[0][0] == "t");
  CHECK(rows[0][5] == "Delta");
  CHECK(rows[0][8] == "eta_hat_1");
  CHECK(rows[0][11] == "c_hat_1");
  CHECK(rows[0][14] == "e_tilde_1");

  // The written summary parses back to the in-memory digest.
  auto on_disk = Json::parse(read_file(fs::path(art.dir) / "summary.json"));
  CHECK(on_disk == art.summary);
  CHECK(on_disk.at("scenario") == "S1");
  CHECK(on_disk.at("records").get<size_t>() == art.result.records.size());
  CHECK(on_disk.contains("flags"));
  CHECK(on_disk.at("residual_sup").at("nlpre").get<double>() < 1e-6);

  // Output directory override wins over the root.
  auto cfg2 = tiny_cfg("S1", 1.0);
  cfg2.output_dir = (tmp.path / "elsewhere").string();
  auto art2 = run_experiment(cfg2, tmp.path.string());
  CHECK(art2.dir == cfg2.output_dir);
  CHECK(fs::exists(fs::path(cfg2.output_dir) / "run.csv"));
}

TEST_CASE("experiment outputs are byte-deterministic", "[harness]") {
  TempDir tmp("det");
  auto cfg = tiny_cfg("S1-noise", 2.0);
  cfg.output_dir = (tmp.path / "a").string();
  run_experiment(cfg, tmp.path.string());
  cfg.output_dir = (tmp.path / "b").string();
  run_experiment(cfg, tmp.path.string());
  CHECK(read_file(tmp.path / "a" / "run.csv") == read_file(tmp.path / "b" / "run.csv"));
  CHECK(read_file(tmp.path / "a" / "summary.json") ==
        read_file(tmp.path / "b" / "summary.json"));
}

TEST_CASE("summary digest reflects the run", "[harness]") {
  auto cfg = tiny_cfg("S1", 20.0);
  auto result = run_pipeline(cfg);
  auto s = make_summary(cfg, result);
  CHECK(s.at("aborted") == false);
  CHECK(s.at("alpha").get<double>() == Catch::Approx(cfg.resolved_alpha()).epsilon(1e-14));
  CHECK(s.at("final").at("t").get<double>() == Catch::Approx(20.0).margin(1e-9));
  CHECK(s.at("delta_max_drop").get<double>() <= 1e-10);
  CHECK(s.at("lambda_max_F_max_rise").get<double>() <= 1e-12);
  CHECK(s.at("u_lyap_max_rise").get<double>() <= 1e-12);
  CHECK(s.at("truth").at("z_star").get<double>() ==
        Catch::Approx(z_star(result.truth.c)).epsilon(1e-14));

  // Empty run: the digest stays well-formed.
  auto none = make_summary(cfg, PipelineResult{});
  CHECK(none.at("records") == 0);
  CHECK_FALSE(none.contains("final"));
}

TEST_CASE("load-torque sweep", "[harness]") {
  TempDir tmp("sweep");
  auto base = tiny_cfg("S1", 20.0);
  double j = base.inertia;
  auto sweep = small_te_sweep(base, {0.0, 0.01 * j, 0.02 * j}, tmp.path.string());
  REQUIRE(sweep.points.size() == 3);

  // The zero-torque point reproduces the unloaded baseline exactly.
  auto baseline = run_pipeline(base);
  CHECK(sweep.points[0].te == 0.0);
  CHECK(sweep.points[0].sup_d == baseline.nlpre_max);
  CHECK(sweep.points[0].ratio == 0.0);

  CHECK(sweep.points[1].ratio > 0.0);
  CHECK(sweep.ratio_max >= sweep.ratio_min);
  CHECK(sweep.ratio_min > 0.0);
  CHECK(sweep.ratio_max / sweep.ratio_min < 2.0);

  CHECK(fs::exists(tmp.path / "sweep-te" / "sweep.csv"));
  auto rows = read_csv(tmp.path / "sweep-te" / "sweep.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0][0] == "te");
  CHECK(sweep.summary.at("ratio_spread_factor").get<double>() ==
        Catch::Approx(sweep.ratio_max / sweep.ratio_min).epsilon(1e-14));
}

TEST_CASE("output root resolution", "[harness]") {
  CHECK(resolve_out_root("explicit") == "explicit");
  ::setenv("CPEST_OUT_ROOT", "/tmp/from-env", 1);
  CHECK(resolve_out_root("") == "/tmp/from-env");
  CHECK(resolve_out_root("cli-wins") == "cli-wins");
  ::unsetenv("CPEST_OUT_ROOT");
  CHECK(resolve_out_root("") == "out");
}
