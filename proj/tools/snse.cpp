// snse <mode> --config <path> [--seed N] [--output DIR] [--workers N]

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "snse/config.hpp"
#include "snse/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Navier-Stokes on the rotating sphere driven by subordinated stable noise"};
  std::string mode_text;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<int> workers;
  app.add_option("mode", mode_text, "simulate | verify-operators | verify-noise | verify-ou | verify-energy")
      ->required();
  app.add_option("--config,-c", config_path, "experiment file")->required();
  app.add_option("--seed", seed, "overrides run.seed");
  app.add_option("--output,-o", output, "overrides run.output_dir");
  app.add_option("--workers,-j", workers, "overrides run.workers")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return snse::exit_code::usage;
  }

  snse::Mode mode;
  if (!snse::parse_mode(mode_text, mode)) {
    std::cerr << "unknown mode '" << mode_text << "'\n";
    return snse::exit_code::usage;
  }

  snse::ExperimentConfig cfg;
  try {
    cfg = snse::parse_config(config_path, mode);
  } catch (const snse::ConfigError& e) {
    std::cerr << config_path;
    if (e.line() > 0) std::cerr << ':' << e.line();
    std::cerr << ": " << e.what() << '\n';
    return snse::exit_code::usage;
  } catch (const snse::IoError& e) {
    std::cerr << e.what() << '\n';
    return snse::exit_code::usage;
  }
  if (seed) {
    cfg.seed = *seed;
    cfg.noise.seed = *seed;
  }
  if (output) cfg.output_dir = *output;
  if (workers) {
    cfg.workers = *workers;
    cfg.solver.workers = *workers;
  }
  return snse::run_experiment(cfg, std::cout);
}
