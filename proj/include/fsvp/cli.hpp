#pragma once

// Command implementations behind tools/fsvp. Each returns the process exit
// code and writes human-readable output to `out`, diagnostics to `err`.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsvp/config.hpp"
#include "fsvp/driver.hpp"
#include "fsvp/history_io.hpp"

namespace fsvp::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kSolverFailure = 3, kMismatch = 4 };

struct RunOverrides {
  std::optional<std::string> method;
  std::optional<double> dt;
  std::optional<std::string> out_dir;
};

/// Summary of one run. `config` is the resolved configuration.
inline nlohmann::ordered_json summarize(const RunConfig& cfg, const LoadingProgram& prog, const ScenarioResult& res) {
  nlohmann::ordered_json j;
  double max_xi = 0, det_i = 0, det_ii = 0, min_diss = std::numeric_limits<double>::infinity();
  double peak_sigma = 0, peak_tau = 0;
  std::array<double, 6> peak_T{};
  for (const auto& r : res.history) {
    max_xi = std::max(max_xi, r.xi);
    det_i = std::max(det_i, std::abs(r.det_Ci - 1.0));
    det_ii = std::max(det_ii, std::abs(r.det_Cii - 1.0));
    min_diss = std::min(min_diss, r.diss);
    peak_sigma = std::max(peak_sigma, std::abs(r.sigma));
    peak_tau = std::max(peak_tau, std::abs(r.tau));
    for (int a = 0; a < 6; ++a) peak_T[a] = std::max(peak_T[a], std::abs(r.T[a]));
  }
  j["scenario"] = cfg.scenario.name;
  j["method"] = to_string(cfg.method);
  j["dt"] = prog.dt;
  j["steps"] = prog.steps();
  j["max_xi"] = max_xi;
  j["peak_abs_stress"] = {{"T11", peak_T[0]}, {"T22", peak_T[1]}, {"T33", peak_T[2]}, {"T12", peak_T[3]},
                          {"T13", peak_T[4]}, {"T23", peak_T[5]}, {"sigma", peak_sigma}, {"tau", peak_tau}};
  j["max_abs_det_Ci_minus_1"] = det_i;
  j["max_abs_det_Cii_minus_1"] = det_ii;
  j["max_skew_ratio"] = res.max_skew_ratio;
  j["min_dissipation_increment"] = min_diss;
  j["newton_iterations"] = res.newton_iterations;
  j["xi_iterations"] = res.xi_iterations;
  j["config"] = cfg.to_json();
  return j;
}

inline void apply_overrides(RunConfig& cfg, const RunOverrides& o) {
  if (o.method) cfg.method = parse_method(*o.method);
  if (o.dt) {
    if (!(*o.dt > 0.0) || !std::isfinite(*o.dt)) throw ConfigError("--dt must be positive");
    cfg.scenario.dt = *o.dt;
  }
  if (o.out_dir) cfg.output.dir = *o.out_dir;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

/// run --config <path> [--method] [--dt] [--out]
inline int run_command(const std::string& config_path, const RunOverrides& overrides, std::ostream& out,
                       std::ostream& err) {
  RunConfig cfg;
  LoadingProgram prog;
  std::filesystem::path dir;
  try {
    cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    prog = cfg.program();
    dir = ensure_dir(cfg.output.dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  ScenarioResult res;
  try {
    res = run_scenario(prog, cfg.method, cfg.material, cfg.solver);
  } catch (const ScenarioError& e) {
    err << "solver failure at t = " << format_double(e.time()) << ": " << e.what() << '\n';
    if (e.step_size()) err << "reduce dt (current dt = " << format_double(prog.dt) << ")\n";
    return kSolverFailure;
  }
  const std::string prefix = cfg.output_prefix();
  const auto csv_path = dir / (prefix + ".csv");
  const auto json_path = dir / (prefix + "_summary.json");
  {
    std::ofstream f(csv_path);
    write_history_csv(f, res.history);
    if (!f) {
      err << "cannot write " << csv_path.string() << '\n';
      return kConfigError;
    }
  }
  const auto summary = summarize(cfg, prog, res);
  {
    std::ofstream f(json_path);
    f << summary.dump(2) << '\n';
    if (!f) {
      err << "cannot write " << json_path.string() << '\n';
      return kConfigError;
    }
  }
  out << "wrote " << csv_path.string() << " (" << res.history.size() << " rows)\n";
  out << "wrote " << json_path.string() << '\n';
  out << "max xi " << format_double(summary["max_xi"].get<double>()) << ", max |det C_i - 1| "
      << format_double(summary["max_abs_det_Ci_minus_1"].get<double>()) << '\n';
  return kOk;
}

/// compare <test.csv> <ref.csv> [--tol rel] [--series path]
inline int compare_command(const std::string& test_path, const std::string& ref_path, std::optional<double> tol,
                           const std::optional<std::string>& series_path, std::ostream& out, std::ostream& err) {
  ComparisonMetrics m;
  try {
    m = compare_histories(read_history_csv(test_path), read_history_csv(ref_path));
  } catch (const CsvError& e) {
    err << "parse error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "grid error: " << e.what() << '\n';
    return kConfigError;
  }
  out << "shared_points " << m.shared_points << '\n'
      << "max_abs " << format_double(m.max_abs) << '\n'
      << "rms " << format_double(m.rms) << '\n'
      << "max_frobenius " << format_double(m.max_frobenius) << '\n'
      << "ref_scale " << format_double(m.ref_scale) << '\n'
      << "relative_max " << format_double(m.relative_max) << '\n';
  if (series_path) {
    std::ofstream f(*series_path);
    f << "t,error\n";
    for (std::size_t i = 0; i < m.times.size(); ++i)
      f << format_double(m.times[i]) << ',' << format_double(m.errors[i]) << '\n';
    if (!f) {
      err << "cannot write " << *series_path << '\n';
      return kConfigError;
    }
  }
  if (tol && !(m.relative_max <= *tol)) {
    err << "mismatch: relative_max " << format_double(m.relative_max) << " exceeds " << format_double(*tol) << '\n';
    return kMismatch;
  }
  return kOk;
}

/// Parse "5,2.5,1.25".
inline std::vector<double> parse_dts(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double x = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size() || !(x > 0.0))
      throw ConfigError("--dts: cannot parse '" + item + "'");
    v.push_back(x);
  }
  if (v.size() < 2) throw ConfigError("--dts: need at least two step sizes");
  return v;
}

/// converge --config <path> --dts a,b,c [--method] [--ref-dt] [--out]
inline int converge_command(const std::string& config_path, const std::string& dts_text,
                            const RunOverrides& overrides, double ref_dt, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  LoadingProgram prog;
  std::vector<double> dts;
  std::filesystem::path dir;
  try {
    cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    dts = parse_dts(dts_text);
    std::vector<double> all = dts;
    all.push_back(ref_dt);
    for (double dt : all) {
      cfg.scenario.dt = dt;
      prog = cfg.program();
    }
    for (std::size_t i = 1; i < dts.size(); ++i)
      if (!(dts[i] < dts[i - 1])) throw ConfigError("--dts must be sorted descending");
    dir = ensure_dir(cfg.output.dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  ConvergenceResult r;
  try {
    LoadingProgram ref = prog;
    ref.dt = ref_dt;
    const auto reference = run_scenario(ref, Method::EM, cfg.material, cfg.solver).history;
    r = convergence_study(prog, cfg.method, dts, cfg.material, cfg.solver, reference);
  } catch (const ScenarioError& e) {
    err << "solver failure at t = " << format_double(e.time()) << ": " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const auto path = dir / (cfg.output_prefix() + "_convergence.csv");
  std::ofstream f(path);
  f << "dt,error\n";
  out << "method " << to_string(cfg.method) << ", reference em dt=" << format_double(ref_dt) << '\n';
  for (std::size_t i = 0; i < r.dts.size(); ++i) {
    f << format_double(r.dts[i]) << ',' << format_double(r.errors[i]) << '\n';
    out << "dt " << format_double(r.dts[i]) << "  error " << format_double(r.errors[i]) << '\n';
  }
  if (r.degenerate)
    out << "order: degenerate (errors at roundoff level)\n";
  else
    out << "order " << format_double(r.order) << '\n';
  out << "wrote " << path.string() << '\n';
  return kOk;
}

}  // namespace fsvp::cli
