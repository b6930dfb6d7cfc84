#pragma once

#include "wolf/core_math.hpp"
#include "wolf/robustness.hpp"
#include "wolf/scenarios.hpp"
#include "wolf/weights.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wolf {

/// Invalid or inconsistent experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Output files could not be written (CLI exit code 3).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One filter entry of an experiment: a kind tag plus the union of the
/// hyperparameters the kinds use.
///
/// Kalman-family kinds (track2d, regress1d): kf, ekf, wolf-imq, wolf-md,
/// wolf-tmd, wolf-pdtmd, kf-iw, kf-b, ogd.  Ensemble kinds (lorenz96): enkf,
/// ap-enkf, pp-enkf, hub-enkf.
struct FilterConfig {
  std::string kind;
  double c = 1.0;              // weighting threshold
  double w0 = 1.0;             // constant weight
  double ell = 1.0;            // kf-iw noise scaling
  double alpha0 = 1.0;         // kf-b prior shape
  double beta0 = 1.0;          // kf-b prior shape
  double tol = 1e-6;           // kf-b skip tolerance
  int inner_iters = 1;         // kf-iw / kf-b / ogd
  double learning_rate = 0.05; // ogd
  double inflation = 1.0;      // ensemble covariance inflation

  std::string label;  // CSV identity; defaults to kind
};

struct SweepAxis {
  std::string parameter;        // "c", "ell", "alpha0", "learning_rate", ...
  std::vector<double> values;
};

/// Fully resolved experiment description: scenario kind and parameters,
/// filter list, trial/seed/output settings, optional sweep axis.
struct ExperimentConfig {
  std::string scenario;  // track2d | lorenz96 | regress1d | pif
  std::vector<FilterConfig> filters;
  int trials = 100;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int jobs = 1;
  std::string reference;  // filter label used for slowdown ratios
  bool timing_enabled = true;

  // track2d
  Tracking2dConfig tracking;
  // lorenz96
  Lorenz96Config lorenz;
  int particles = 500;
  // regress1d
  int regression_steps = 1500;
  double regression_p_eps = 0.05;
  double regression_r = 0.3;  // modelled measurement variance for the filters
  bool regression_sorted = false;
  std::string csv_path;      // optional external dataset
  int csv_target_column = -1;
  double csv_warmup_fraction = 0.1;
  // pif
  PifGridSpec pif_grid_spec;
  int pif_history = 20;
  bool pif_reverse = false;

  std::optional<SweepAxis> sweep;
};

/// Parses the flat key-value config format (one `key = value` per line,
/// `#` comments, dotted section keys).  Unknown keys are rejected.
ExperimentConfig load_experiment_config(const std::string& path);

/// Applies a CLI override on top of a loaded config.
void apply_cli_overrides(ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                         std::optional<std::string> out_dir, std::optional<int> trials,
                         std::optional<int> jobs);

/// Runs the configured experiment: per trial and filter, generates the
/// trial-seeded data, runs the filter, and records metrics and per-step
/// timing; writes results.csv and summary.csv under out_dir.
void run_experiment(const ExperimentConfig& cfg);

/// Runs the experiment once per sweep value and writes sweep.csv (long
/// format: value, filter, trial, metric, metric_value) plus
/// sweep_summary.csv with percentile-bootstrap intervals.
void run_sweep(const ExperimentConfig& cfg);

/// Computes PIF grids over the tracking history for every configured filter
/// and writes one pif_<label>.csv per filter.
void run_pif_command(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Building blocks shared with the test suites
// ---------------------------------------------------------------------------

/// Result of one filter pass over one generated trial.
struct FilterRunResult {
  std::vector<double> metrics;            // scenario metric values, fixed order
  std::vector<std::string> metric_names;
  double mean_weight = 1.0;
  std::int64_t median_step_ns = 0;
  int outlier_steps = 0;
  bool diverged = false;
};

FilterRunResult run_tracking_filter(const FilterConfig& filter, const Tracking2dConfig& scenario,
                                    const TrackingData& data, bool timing_enabled);

FilterRunResult run_lorenz_filter(const FilterConfig& filter, const Lorenz96Config& scenario,
                                  const Lorenz96Data& data, const Matrix& initial_ensemble,
                                  RngStream rng, bool timing_enabled);

FilterRunResult run_regression_filter(const FilterConfig& filter,
                                      const std::vector<RegressionSample>& stream,
                                      const Vector& initial_params, double modelled_r,
                                      bool timing_enabled);

/// The per-trial rows of results.csv for one experiment, already sorted by
/// (trial, filter); exposed so tests can exercise the pipeline in memory.
struct ExperimentRow {
  int trial = 0;
  std::string filter;
  int steps = 0;
  FilterRunResult result;
};

std::vector<ExperimentRow> run_experiment_rows(const ExperimentConfig& cfg);

/// PifFilterSpec for one configured filter over the standard tracking SSM.
PifFilterSpec make_tracking_pif_filter(const FilterConfig& filter,
                                       const Tracking2dConfig& scenario);

}  // namespace wolf
