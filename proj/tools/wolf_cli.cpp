// Experiment runner for the weighted-observation-likelihood filtering toolkit.
//
// Subcommands: track2d, lorenz96, regress1d, pif, sweep.  Each takes a flat
// key-value config file plus optional overrides for seed, output directory,
// trial count and worker count.  Exit codes: 0 success, 2 config error,
// 3 I/O error.

#include "wolf/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> trials;
  std::optional<int> jobs;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "base random seed");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--trials", args.trials, "number of trials");
  cmd->add_option("--jobs", args.jobs, "worker threads across trials");
}

wolf::ExperimentConfig load(const CommonArgs& args, const std::string& scenario) {
  wolf::ExperimentConfig cfg = wolf::load_experiment_config(args.config_path);
  if (!scenario.empty()) cfg.scenario = scenario;
  if (cfg.scenario.empty()) {
    throw wolf::ConfigError("config: scenario.kind is required for the sweep subcommand");
  }
  wolf::apply_cli_overrides(cfg, args.seed, args.out_dir, args.trials, args.jobs);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wolf: robust Kalman / ensemble Kalman filtering experiments"};
  app.require_subcommand(1);

  CommonArgs track_args, lorenz_args, regress_args, pif_args, sweep_args;
  CLI::App* track = app.add_subcommand("track2d", "2-d constant-velocity tracking trials");
  add_common_options(track, track_args);
  CLI::App* lorenz = app.add_subcommand("lorenz96", "Lorenz96 ensemble filtering trials");
  add_common_options(lorenz, lorenz_args);
  CLI::App* regress = app.add_subcommand("regress1d", "online 1-d MLP regression trials");
  add_common_options(regress, regress_args);
  CLI::App* pif = app.add_subcommand("pif", "posterior influence grids on tracking history");
  add_common_options(pif, pif_args);
  CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter sweep over the config scenario");
  add_common_options(sweep, sweep_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (track->parsed()) {
      wolf::run_experiment(load(track_args, "track2d"));
    } else if (lorenz->parsed()) {
      wolf::run_experiment(load(lorenz_args, "lorenz96"));
    } else if (regress->parsed()) {
      wolf::run_experiment(load(regress_args, "regress1d"));
    } else if (pif->parsed()) {
      wolf::run_pif_command(load(pif_args, "pif"));
    } else if (sweep->parsed()) {
      wolf::run_sweep(load(sweep_args, ""));
    }
  } catch (const wolf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const wolf::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
