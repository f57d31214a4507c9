#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fsvp/cli.hpp"

using namespace fsvp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("fsvp_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

/// Runs the installed binary; returns its exit status and captured stderr.
std::pair<int, std::string> run_cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(FSVP_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::string config_path(const std::string& name) { return std::string(FSVP_SOURCE_DIR) + "/configs/" + name; }

}  // namespace

TEST(Config, MinimalTable2ConfigIsDefaulted) {
  const auto cfg = parse_config(R"({"material": {"preset": "table2"}, "scenario": {"name": "accuracy1"}})");
  EXPECT_EQ(cfg.material.k, 73500.0);
  EXPECT_EQ(cfg.material.mu, 28200.0);
  EXPECT_EQ(cfg.material.c, 3500.0);
  EXPECT_EQ(cfg.material.gamma, 460.0);
  EXPECT_EQ(cfg.material.K, 270.0);
  EXPECT_EQ(cfg.material.m, 3.6);
  EXPECT_EQ(cfg.material.eta, 2e6);
  EXPECT_EQ(cfg.material.k0, 1.0);
  EXPECT_EQ(cfg.material.kappa, 0.028);
  EXPECT_EQ(cfg.material.beta, 5.0);
  EXPECT_EQ(cfg.method, Method::MEBM);
  EXPECT_EQ(cfg.scenario.t_end, 300.0);
  EXPECT_EQ(cfg.solver.xi_cap, 0.2);
  EXPECT_EQ(cfg.program().variant, Variant::AccuracyUnimodular);
}

TEST(Config, Fig7Preset) {
  const auto cfg = parse_config(R"({"material": {"preset": "fig7_modified"}, "scenario": {"name": "torsion"}})");
  EXPECT_EQ(cfg.material.kappa, 0.0035);
  EXPECT_EQ(cfg.material.c, 1500.0);
  EXPECT_EQ(cfg.material.beta, 10.0);
  EXPECT_EQ(cfg.material.gamma, 1800.0);
  EXPECT_EQ(cfg.material.k, 73500.0);
  EXPECT_EQ(cfg.material.K, 270.0);
}

TEST(Config, ValidationErrors) {
  EXPECT_THROW(parse_config(R"({"material": {"K": -1}, "scenario": {"name": "accuracy1"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"material": {"Kk": 1}, "scenario": {"name": "accuracy1"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"name": "accuracy1", "amplitude": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"name": "nope"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"name": "accuracy1", "dt": 7}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"name": "accuracy1"}, "solver": {"method": "rk4"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scenario": {"name": "accuracy1"}, "extra": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"material": {"preset": "table2"}})"), ConfigError);
  try {
    parse_config("{\n  \"scenario\": {\"name\": \"accuracy1\",,}\n}");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Config, ShippedConfigsLoad) {
  for (const auto& entry : fs::directory_iterator(std::string(FSVP_SOURCE_DIR) + "/configs")) {
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_config(entry.path().string()).program());
  }
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(HistoryCsv, RoundTripIsExact) {
  const auto res = run_scenario(accuracy_program(Variant::AccuracyRaw, 10.0), Method::EM, MaterialParams::table2(),
                                SolverSettings{});
  std::stringstream ss;
  write_history_csv(ss, res.history);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "t,F11,F12,F13,F21,F22,F23,F31,F32,F33,T11,T22,T33,T12,T13,T23,sigma,tau,xi,f,R,s,s_d,det_Ci,det_Cii,diss");
  std::stringstream in(text);
  EXPECT_EQ(read_history_csv(in), res.history);
}

TEST(HistoryCsv, MalformedRowIsNamed) {
  std::stringstream ss;
  write_history_csv(ss, {HistoryRecord{}});
  std::string text = ss.str() + "1,2,3\n";
  std::stringstream in(text);
  try {
    read_history_csv(in);
    FAIL() << "expected CsvError";
  } catch (const CsvError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  std::stringstream bad_header("a,b\n");
  EXPECT_THROW(read_history_csv(bad_header), CsvError);
}

TEST(Cli, RunWritesExpectedArtifactsDeterministically) {
  const fs::path dir = scratch("run");
  const auto [code, err] =
      run_cli("run --config " + config_path("accuracy1.json") + " --method mebm --dt 2.5 --out " + dir.string(), dir);
  ASSERT_EQ(code, 0) << err;
  const std::string csv = slurp(dir / "accuracy1.csv");
  std::stringstream in(csv);
  const auto hist = read_history_csv(in);
  ASSERT_EQ(hist.size(), 121u);
  EXPECT_EQ(hist.back().t, 300.0);
  const auto summary = nlohmann::json::parse(slurp(dir / "accuracy1_summary.json"));
  EXPECT_EQ(summary["method"], "mebm");
  EXPECT_EQ(summary["config"]["material"]["K"], 270.0);
  EXPECT_LE(summary["max_abs_det_Ci_minus_1"].get<double>(), 1e-10);
  EXPECT_GE(summary["min_dissipation_increment"].get<double>(), -1e-8);
  EXPECT_TRUE(summary.contains("max_skew_ratio"));

  const fs::path dir2 = scratch("run_again");
  ASSERT_EQ(run_cli("run --config " + config_path("accuracy1.json") + " --method mebm --dt 2.5 --out " + dir2.string(),
                    dir2)
                .first,
            0);
  EXPECT_EQ(slurp(dir2 / "accuracy1.csv"), csv);
  auto again = nlohmann::json::parse(slurp(dir2 / "accuracy1_summary.json"));
  // only the output location differs between the two runs
  again["config"]["output"] = summary["config"]["output"];
  EXPECT_EQ(again, summary);
}

TEST(Cli, OversizedStepAsksToReduceDt) {
  const fs::path dir = scratch("big_dt");
  const auto [code, err] = run_cli("run --config " + config_path("accuracy1.json") + " --dt 100 --out " + dir.string(), dir);
  EXPECT_EQ(code, 3);
  EXPECT_NE(err.find("reduce dt"), std::string::npos) << err;
  const auto [code2, err2] =
      run_cli("run --config " + config_path("accuracy1.json") + " --dt 1000 --out " + dir.string(), dir);
  EXPECT_NE(code2, 0);
  EXPECT_NE(err2.find("reduce dt"), std::string::npos) << err2;
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const fs::path dir = scratch("cfg");
  write_file(dir / "bad.json", R"({"material": {"K": -1}, "scenario": {"name": "accuracy1"}})");
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string(), dir).first, 2);
  EXPECT_EQ(run_cli("run --config " + config_path("accuracy1.json") + " --method rk4", dir).first, 2);
  EXPECT_EQ(run_cli("frobnicate", dir).first, 2);
}

TEST(Cli, CompareAgainstItselfAndMalformed) {
  const fs::path dir = scratch("compare");
  ASSERT_EQ(run_cli("run --config " + config_path("accuracy2.json") + " --dt 10 --out " + dir.string(), dir).first, 0);
  const std::string csv = (dir / "accuracy2.csv").string();
  std::ostringstream out, err;
  EXPECT_EQ(cli::compare_command(csv, csv, 0.0, std::nullopt, out, err), 0);
  EXPECT_NE(out.str().find("max_abs 0\n"), std::string::npos) << out.str();

  write_file(dir / "broken.csv", slurp(csv) + "1,2\n");
  const auto [code, msg] = run_cli("compare " + (dir / "broken.csv").string() + " " + csv, dir);
  EXPECT_EQ(code, 2);
  EXPECT_NE(msg.find("row"), std::string::npos) << msg;
}

TEST(Cli, CompareErrorShrinksWithStep) {
  const fs::path dir = scratch("compare_conv");
  const std::string cfg = config_path("accuracy1.json");
  ASSERT_EQ(run_cli("run --config " + cfg + " --method em --dt 0.25 --out " + (dir / "ref").string(), dir).first, 0);
  ASSERT_EQ(run_cli("run --config " + cfg + " --dt 2.5 --out " + (dir / "a").string(), dir).first, 0);
  ASSERT_EQ(run_cli("run --config " + cfg + " --dt 1.25 --out " + (dir / "b").string(), dir).first, 0);
  const std::string ref = (dir / "ref" / "accuracy1.csv").string();
  auto max_abs = [&](const std::string& test) {
    std::stringstream in(slurp(test)), rin(slurp(ref));
    return compare_histories(read_history_csv(in), read_history_csv(rin)).max_abs;
  };
  const double ea = max_abs((dir / "a" / "accuracy1.csv").string());
  const double eb = max_abs((dir / "b" / "accuracy1.csv").string());
  EXPECT_GT(ea, 0.0);
  EXPECT_LT(eb, ea);
  // a mismatch beyond --tol exits with 4
  EXPECT_EQ(run_cli("compare " + (dir / "a" / "accuracy1.csv").string() + " " + ref + " --tol 1e-12", dir).first, 4);
  // the reference does not refine a coarser grid the other way round
  EXPECT_EQ(run_cli("compare " + ref + " " + (dir / "a" / "accuracy1.csv").string(), dir).first, 2);
}

TEST(Cli, ConvergeReportsOrder) {
  const fs::path dir = scratch("converge");
  const auto [code, err] = run_cli(
      "converge --config " + config_path("accuracy1.json") + " --dts 10,5 --ref-dt 2.5 --out " + dir.string(), dir);
  ASSERT_EQ(code, 0) << err;
  EXPECT_NE(slurp(dir / "stdout.txt").find("order "), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "accuracy1_convergence.csv"));
  EXPECT_EQ(run_cli("converge --config " + config_path("accuracy1.json") + " --dts 5,x", dir).first, 2);
}
