// speclab command line: run <config.json> [--out DIR] [--threads N] [--verbose]

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "speclab/error.hpp"
#include "speclab/experiment.hpp"
#include "speclab/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral inequality and heat control experiments"};
  app.set_version_flag("--version", std::string(SPECLAB_VERSION));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = speclab::default_threads();
  bool verbose = false;
  CLI::App* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides SPECLAB_OUT and the config)");
  run->add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  run->add_flag("--verbose", verbose, "Echo the log to stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    const speclab::ExperimentConfig config = speclab::parse_config(speclab::load_config(config_path));
    speclab::RunOptions options;
    if (!out_dir.empty()) options.out_dir = out_dir;
    options.threads = threads;
    options.verbose = verbose;
    options.console = &std::cout;
    const speclab::RunResult result = speclab::run_experiment(config, options);
    for (const auto& c : result.checks)
      if (!c.passed) std::cerr << "check failed: " << c.name << " (value " << c.value << ", limit " << c.limit << ")\n";
    std::cout << (result.passed ? "PASS " : "FAIL ") << config.experiment << " -> "
              << result.out_dir.string() << "\n";
    return result.passed ? 0 : 1;
  } catch (const speclab::Error& e) {
    std::cerr << "error [" << speclab::to_string(e.kind()) << "]: " << e.what() << "\n";
    return e.kind() == speclab::ErrorKind::config_validation ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
