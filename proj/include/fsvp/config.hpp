#pragma once

// Run configuration: a JSON document with sections material, scenario,
// solver and output. Unknown keys are rejected everywhere.
//
//   {
//     "material": {"preset": "table2", "K": 270},
//     "scenario": {"name": "accuracy1", "dt": 2.5},
//     "solver":   {"method": "mebm", "newton_tol": 1e-12},
//     "output":   {"dir": "out", "prefix": "acc1"}
//   }

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "fsvp/driver.hpp"
#include "fsvp/integrator.hpp"
#include "fsvp/material.hpp"

namespace fsvp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Method parse_method(const std::string& s) {
  if (s == "ebm") return Method::EBM;
  if (s == "mebm") return Method::MEBM;
  if (s == "em") return Method::EM;
  throw ConfigError("unknown method '" + s + "' (expected em, mebm or ebm)");
}

struct ScenarioConfig {
  std::string name = "accuracy1";
  double dt = 2.5;
  double t_end = 300.0;
  std::string mode = "monotonic";
  double rate = 0.0;
  double eps_max = 0.2;
  double phi_max = 0.5;
  double amplitude = 0.0;
  int cycles = 0;
  std::vector<double> levels;
  double stress_rate = 27.0;
  double hold = 0.0;
};

struct OutputConfig {
  std::string dir = ".";
  std::string prefix;
};

struct RunConfig {
  std::string preset = "table2";
  MaterialParams material;
  ScenarioConfig scenario;
  Method method = Method::MEBM;
  SolverSettings solver;
  OutputConfig output;

  std::string output_prefix() const { return output.prefix.empty() ? scenario.name : output.prefix; }

  /// The loading program described by the scenario section.
  LoadingProgram program() const {
    const ScenarioConfig& s = scenario;
    try {
      if (s.name == "accuracy1") return accuracy_program(Variant::AccuracyUnimodular, s.dt, s.t_end);
      if (s.name == "accuracy2") return accuracy_program(Variant::AccuracyRaw, s.dt, s.t_end);
      if (s.name == "uniaxial")
        return s.mode == "cyclic" ? uniaxial_cyclic(s.rate, s.amplitude, s.cycles, s.dt)
                                  : uniaxial_monotonic(s.rate, s.eps_max, s.dt);
      if (s.name == "torsion")
        return s.mode == "cyclic" ? torsion_cyclic(s.rate, s.amplitude, s.cycles, s.dt)
                                  : torsion_monotonic(s.rate, s.phi_max, s.dt);
      if (s.name == "relaxation") return relaxation_program(s.levels, s.rate, s.hold, s.dt);
      if (s.name == "creep") return creep_program(s.levels, s.stress_rate, s.hold, s.dt);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("scenario: ") + e.what());
    }
    throw ConfigError("scenario: unknown name '" + s.name + "'");
  }

  /// Fully resolved configuration, echoed into run summaries.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    const MaterialParams& m = material;
    j["material"] = {{"preset", preset}, {"k", m.k},         {"mu", m.mu},     {"c", m.c},
                     {"gamma", m.gamma}, {"K", m.K},         {"m", m.m},       {"eta", m.eta},
                     {"k0", m.k0},       {"kappa", m.kappa}, {"beta", m.beta}};
    nlohmann::ordered_json sc;
    const ScenarioConfig& s = scenario;
    sc["name"] = s.name;
    sc["dt"] = s.dt;
    if (s.name == "accuracy1" || s.name == "accuracy2") {
      sc["t_end"] = s.t_end;
    } else if (s.name == "uniaxial" || s.name == "torsion") {
      sc["mode"] = s.mode;
      sc["rate"] = s.rate;
      if (s.mode == "cyclic") {
        sc["amplitude"] = s.amplitude;
        sc["cycles"] = s.cycles;
      } else if (s.name == "uniaxial") {
        sc["eps_max"] = s.eps_max;
      } else {
        sc["phi_max"] = s.phi_max;
      }
    } else {
      sc["levels"] = s.levels;
      if (s.name == "relaxation")
        sc["rate"] = s.rate;
      else
        sc["stress_rate"] = s.stress_rate;
      sc["hold"] = s.hold;
    }
    j["scenario"] = sc;
    j["solver"] = {{"method", to_string(method)},
                   {"newton_tol", solver.newton_tol},
                   {"newton_max_iter", solver.newton_max_iter},
                   {"xi_tol", solver.xi_tol},
                   {"xi_max_iter", solver.xi_max_iter},
                   {"fd_epsilon", solver.fd_epsilon},
                   {"xi_cap", solver.xi_cap}};
    j["output"] = {{"dir", output.dir}, {"prefix", output_prefix()}};
    return j;
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
void read_key(const nlohmann::json& obj, const std::string& key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(where + "." + key + ": must be finite");
  }
}

/// 1-based line and column of a byte offset.
inline std::string text_position(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parse and validate a configuration document. `source` names it in messages.
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": parse error at " + detail::text_position(text, e.byte) + ": " + e.what());
  }
  detail::reject_unknown(doc, {"material", "scenario", "solver", "output"}, source);
  RunConfig cfg;

  if (doc.contains("material")) {
    const auto& m = doc["material"];
    detail::reject_unknown(m, {"preset", "k", "mu", "c", "gamma", "K", "m", "eta", "k0", "kappa", "beta"}, "material");
    detail::read_key(m, "preset", cfg.preset, "material");
    if (cfg.preset == "table2")
      cfg.material = MaterialParams::table2();
    else if (cfg.preset == "fig7_modified")
      cfg.material = MaterialParams::fig7_modified();
    else
      throw ConfigError("material.preset: unknown preset '" + cfg.preset + "' (expected table2 or fig7_modified)");
    MaterialParams& p = cfg.material;
    detail::read_key(m, "k", p.k, "material");
    detail::read_key(m, "mu", p.mu, "material");
    detail::read_key(m, "c", p.c, "material");
    detail::read_key(m, "gamma", p.gamma, "material");
    detail::read_key(m, "K", p.K, "material");
    detail::read_key(m, "m", p.m, "material");
    detail::read_key(m, "eta", p.eta, "material");
    detail::read_key(m, "k0", p.k0, "material");
    detail::read_key(m, "kappa", p.kappa, "material");
    detail::read_key(m, "beta", p.beta, "material");
  }
  try {
    cfg.material.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("material: ") + e.what());
  }

  if (!doc.contains("scenario")) throw ConfigError(source + ": missing section 'scenario'");
  {
    const auto& s = doc["scenario"];
    if (!s.is_object()) throw ConfigError("scenario: expected an object");
    ScenarioConfig& sc = cfg.scenario;
    detail::read_key(s, "name", sc.name, "scenario");
    static const std::map<std::string, std::set<std::string>> keys{
        {"accuracy1", {"name", "dt", "t_end"}},
        {"accuracy2", {"name", "dt", "t_end"}},
        {"uniaxial", {"name", "dt", "mode", "rate", "eps_max", "amplitude", "cycles"}},
        {"torsion", {"name", "dt", "mode", "rate", "phi_max", "amplitude", "cycles"}},
        {"relaxation", {"name", "dt", "levels", "rate", "hold"}},
        {"creep", {"name", "dt", "levels", "stress_rate", "hold"}}};
    const auto found = keys.find(sc.name);
    if (found == keys.end()) throw ConfigError("scenario.name: unknown scenario '" + sc.name + "'");
    detail::reject_unknown(s, found->second, "scenario");

    // Defaults per scenario.
    if (sc.name == "uniaxial") {
      sc.rate = 0.1;
      sc.amplitude = 0.05;
      sc.cycles = 10;
    } else if (sc.name == "torsion") {
      sc.rate = 0.01;
      sc.amplitude = 0.2;
      sc.cycles = 3;
    } else if (sc.name == "relaxation") {
      sc.levels = {0.01, 0.02, 0.03};
      sc.rate = 0.1;
      sc.hold = 10.0;
      sc.dt = 0.01;
    } else if (sc.name == "creep") {
      sc.levels = {290.0, 300.0, 310.0};
      sc.hold = 20.0;
      sc.dt = 0.02;
    }
    detail::read_key(s, "mode", sc.mode, "scenario");
    detail::read_key(s, "rate", sc.rate, "scenario");
    detail::read_key(s, "eps_max", sc.eps_max, "scenario");
    detail::read_key(s, "phi_max", sc.phi_max, "scenario");
    detail::read_key(s, "amplitude", sc.amplitude, "scenario");
    detail::read_key(s, "cycles", sc.cycles, "scenario");
    detail::read_key(s, "levels", sc.levels, "scenario");
    detail::read_key(s, "stress_rate", sc.stress_rate, "scenario");
    detail::read_key(s, "hold", sc.hold, "scenario");
    detail::read_key(s, "t_end", sc.t_end, "scenario");
    if (sc.mode != "monotonic" && sc.mode != "cyclic")
      throw ConfigError("scenario.mode: expected monotonic or cyclic");
    // Strain-driven tests default to a strain (or shear) increment of 1e-3 per step.
    if ((sc.name == "uniaxial" || sc.name == "torsion") && sc.rate > 0.0) sc.dt = 1e-3 / sc.rate;
    detail::read_key(s, "dt", sc.dt, "scenario");
  }

  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    detail::reject_unknown(
        s, {"method", "newton_tol", "newton_max_iter", "xi_tol", "xi_max_iter", "fd_epsilon", "xi_cap"}, "solver");
    std::string method = to_string(cfg.method);
    detail::read_key(s, "method", method, "solver");
    cfg.method = parse_method(method);
    detail::read_key(s, "newton_tol", cfg.solver.newton_tol, "solver");
    detail::read_key(s, "newton_max_iter", cfg.solver.newton_max_iter, "solver");
    detail::read_key(s, "xi_tol", cfg.solver.xi_tol, "solver");
    detail::read_key(s, "xi_max_iter", cfg.solver.xi_max_iter, "solver");
    detail::read_key(s, "fd_epsilon", cfg.solver.fd_epsilon, "solver");
    detail::read_key(s, "xi_cap", cfg.solver.xi_cap, "solver");
  }
  try {
    cfg.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("solver: ") + e.what());
  }

  if (doc.contains("output")) {
    const auto& o = doc["output"];
    detail::reject_unknown(o, {"dir", "prefix"}, "output");
    detail::read_key(o, "dir", cfg.output.dir, "output");
    detail::read_key(o, "prefix", cfg.output.prefix, "output");
  }

  cfg.program();  // surfaces inconsistent scenario parameters now
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace fsvp
