// Command-line front end: run experiments, export curve tables, sweep load
// torques, and execute the verification suite.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cpest/cpest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitNumericAbort = 2;
constexpr int kExitVerifyFailure = 3;

cpest::Json load_config_document(const std::string& path, const std::string& scenario,
                                 const std::vector<std::string>& overrides,
                                 std::optional<std::uint64_t> seed) {
  cpest::Json doc;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw cpest::ConfigError("cannot open config file: " + path);
    doc = cpest::Json::parse(in, nullptr, false);
    if (doc.is_discarded())
      throw cpest::ConfigError("config file is not valid JSON: " + path);
  } else {
    doc = cpest::config_to_json(cpest::default_config(scenario));
  }
  if (!scenario.empty()) doc["scenario"] = scenario;
  if (seed) {
    if (!doc.contains("noise") || !doc["noise"].is_object()) doc["noise"] = cpest::Json::object();
    doc["noise"]["seed"] = *seed;
  }
  for (const std::string& ov : overrides) cpest::apply_override(doc, ov);
  return doc;
}

void print_summary_line(const cpest::RunArtifacts& art) {
  const cpest::Json& s = art.summary;
  std::cout << "scenario " << s["scenario"].get<std::string>() << ": ";
  if (s["aborted"].get<bool>()) {
    std::cout << "numeric abort: " << s["abort_reason"].get<std::string>() << "\n";
    return;
  }
  if (!s.contains("final")) {
    std::cout << "empty run (t_f = 0)\n";
    return;
  }
  const cpest::Json& fin = s["final"];
  std::printf("c_hat = (%.6g, %.6g, %.6g)  e_tilde = (%.3g, %.3g, %.3g)  Delta = %.4g\n",
              fin["c_hat"][0].get<double>(), fin["c_hat"][1].get<double>(),
              fin["c_hat"][2].get<double>(), fin["e_tilde"][0].get<double>(),
              fin["e_tilde"][1].get<double>(), fin["e_tilde"][2].get<double>(),
              fin["Delta"].get<double>());
  std::cout << "artifacts in " << art.dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind-turbine power-curve parameter estimation toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, scenario;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file");
    cmd->add_option("--out", out_dir, "output root directory");
    cmd->add_option("--scenario", scenario,
                    "scenario preset (S1, S1-noise, S1-smallTe, S2, baseline-overparam)");
    cmd->add_option("--seed", seed, "noise seed override");
    cmd->add_option("--override", overrides, "dotted-path config override key=value")
        ->take_all();
  };

  CLI::App* cmd_run = app.add_subcommand("run", "execute one configured experiment");
  add_common(cmd_run);

  CLI::App* cmd_curve =
      app.add_subcommand("curve", "tabulate the configured true power curve");
  add_common(cmd_curve);
  double curve_lo = 0.05, curve_hi = 0.5;
  int curve_n = 201;
  std::vector<double> chat_values;
  cmd_curve->add_option("--z-lo", curve_lo, "grid start");
  cmd_curve->add_option("--z-hi", curve_hi, "grid end");
  cmd_curve->add_option("--points", curve_n, "grid size");
  cmd_curve->add_option("--c-hat", chat_values, "overlay estimate c1 c2 c3")->expected(3);

  CLI::App* cmd_sweep =
      app.add_subcommand("sweep-te", "rerun the baseline across small load torques");
  add_common(cmd_sweep);
  std::vector<double> te_fracs{0.0, 0.01, 0.02, 0.05};
  cmd_sweep->add_option("--te-fractions", te_fracs,
                        "torque magnitudes as fractions of the rotor inertia");

  CLI::App* cmd_verify = app.add_subcommand("verify", "run the independent check suite");
  bool corrupt_adjugate = false;
  std::string verify_report_path;
  cmd_verify->add_flag("--corrupt-adjugate", corrupt_adjugate,
                       "deliberately break one check (negative-test hook)");
  cmd_verify->add_option("--report", verify_report_path, "write the report as JSON");

  CLI::App* cmd_defaults =
      app.add_subcommand("print-defaults", "print a scenario's full default configuration");
  std::string defaults_scenario = "S1";
  cmd_defaults->add_option("scenario", defaults_scenario, "scenario name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_defaults->parsed()) {
      std::cout << cpest::config_to_json(cpest::default_config(defaults_scenario)).dump(2)
                << "\n";
      return kExitOk;
    }

    if (cmd_verify->parsed()) {
      std::vector<cpest::OracleReport> reports = cpest::run_verification(corrupt_adjugate);
      for (const cpest::OracleReport& r : reports)
        std::printf("%-32s %s  residual %.3e  tol %.3e  %.1f ms  %s\n", r.name.c_str(),
                    r.passed ? "PASS" : "FAIL", r.max_residual, r.tolerance, r.ms,
                    r.metadata.c_str());
      bool ok = cpest::all_passed(reports);
      std::printf("verification: %zu checks, %s\n", reports.size(),
                  ok ? "all passed" : "FAILURES present");
      if (!verify_report_path.empty()) {
        std::ofstream rf(verify_report_path, std::ios::binary);
        rf << cpest::reports_to_json(reports).dump(2) << "\n";
      }
      return ok ? kExitOk : kExitVerifyFailure;
    }

    cpest::Json doc = load_config_document(config_path, scenario, overrides, seed);
    cpest::ScenarioConfig cfg = cpest::parse_config(doc);
    std::string root = cpest::resolve_out_root(out_dir);

    if (cmd_run->parsed()) {
      cpest::RunArtifacts art = cpest::run_experiment(cfg, root);
      print_summary_line(art);
      return art.result.aborted ? kExitNumericAbort : kExitOk;
    }

    if (cmd_curve->parsed()) {
      namespace fs = std::filesystem;
      fs::path dir = fs::path(root) / "curve";
      fs::create_directories(dir);
      cpest::CpParams c_true = cfg.true_c();
      cpest::CpParams c_est = c_true;
      if (!chat_values.empty())
        c_est = cpest::CpParams{chat_values[0], chat_values[1], chat_values[2]};
      std::string path = (dir / "cp_curve.csv").string();
      cpest::emit_cp_curve(c_true, c_est, nullptr, curve_lo, curve_hi, curve_n, path);
      std::cout << "curve table written to " << path << "\n";
      return kExitOk;
    }

    if (cmd_sweep->parsed()) {
      std::vector<double> magnitudes;
      for (double f : te_fracs) magnitudes.push_back(f * cfg.inertia);
      cpest::SweepResult sweep = cpest::small_te_sweep(cfg, magnitudes, root);
      for (const cpest::SweepPoint& p : sweep.points)
        std::printf("Te = %-8.4g  sup|d| = %-12.5e  ratio = %-10.5g  e_tilde_max = %.3e\n",
                    p.te, p.sup_d, p.ratio, p.e_tilde.maxCoeff());
      if (sweep.ratio_min > 0)
        std::printf("ratio spread factor: %.4g\n", sweep.ratio_max / sweep.ratio_min);
      return kExitOk;
    }
  } catch (const cpest::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfigError;
  } catch (const cpest::NumericAbort& ex) {
    std::cerr << "numeric abort: " << ex.what() << "\n";
    return kExitNumericAbort;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}
