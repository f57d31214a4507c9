#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fsvp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Material-point driver for finite-strain viscoplasticity"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> method, out_dir;
  std::optional<double> dt;

  auto* run = app.add_subcommand("run", "Run one scenario and write history CSV plus summary JSON");
  run->add_option("--config", config, "Configuration file")->required();
  run->add_option("--method", method, "Integrator: em, mebm or ebm");
  run->add_option("--dt", dt, "Time step [s]");
  run->add_option("--out", out_dir, "Output directory");

  std::string test_csv, ref_csv;
  std::optional<double> tol;
  std::optional<std::string> series;
  auto* compare = app.add_subcommand("compare", "Compare the Cauchy stresses of two history files");
  compare->add_option("test", test_csv, "History to check")->required();
  compare->add_option("reference", ref_csv, "Reference history")->required();
  compare->add_option("--tol", tol, "Fail (exit 4) when relative_max exceeds this");
  compare->add_option("--series", series, "Write the error time series to this CSV");

  std::string dts;
  double ref_dt = 0.01;
  auto* converge = app.add_subcommand("converge", "Observed order of convergence against a fine EM reference");
  converge->add_option("--config", config, "Configuration file")->required();
  converge->add_option("--dts", dts, "Descending step sizes, e.g. 5,2.5,1.25")->required();
  converge->add_option("--method", method, "Integrator: em, mebm or ebm");
  converge->add_option("--ref-dt", ref_dt, "Reference step size [s]");
  converge->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fsvp::cli::kConfigError;
  }

  const fsvp::cli::RunOverrides overrides{method, dt, out_dir};
  if (run->parsed()) return fsvp::cli::run_command(config, overrides, std::cout, std::cerr);
  if (compare->parsed()) return fsvp::cli::compare_command(test_csv, ref_csv, tol, series, std::cout, std::cerr);
  return fsvp::cli::converge_command(config, dts, overrides, ref_dt, std::cout, std::cerr);
}
