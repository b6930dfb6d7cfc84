#pragma once

#include "wolf/core_math.hpp"
#include "wolf/gaussian_filters.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wolf {

// ---------------------------------------------------------------------------
// 2-d constant-velocity tracking
// ---------------------------------------------------------------------------

enum class TrackingVariant { kClean, kStudent, kMixture };

/// Constant-velocity tracking scenario: state (x, y, vx, vy), position-only
/// measurements.  The Student variant draws the measurement from a Student-t
/// via its Gamma mixture; the mixture variant doubles the measurement mean
/// with probability p_eps and flags the step.
struct Tracking2dConfig {
  double delta = 0.1;
  double q = 0.10;
  double r = 10.0;
  int steps = 1000;
  TrackingVariant variant = TrackingVariant::kClean;
  double student_nu = 2.01;
  double p_eps = 0.05;
  Vector initial_state = (Vector(4) << 0.0, 0.0, 1.0, 1.0).finished();

  Matrix transition() const;   // 4x4 constant-velocity F
  Matrix observation() const;  // 2x4 position selector H
  Matrix process_cov() const { return q * Matrix::Identity(4, 4); }
  Matrix measurement_cov() const { return r * Matrix::Identity(2, 2); }
};

struct TrackingData {
  Matrix states;        // T x 4
  Matrix measurements;  // T x 2
  std::vector<std::uint8_t> outlier;
};

/// Measurement noise draw scaled by the Student mixture precision tau:
/// chol(R) z / sqrt(tau).  tau = 1 reproduces the Gaussian model exactly.
Vector tracking2d_measurement_noise(const SpdMatrix& r, double tau, RngStream& rng);

TrackingData tracking2d_generate(const Tracking2dConfig& cfg, RngStream& rng);

// ---------------------------------------------------------------------------
// Lorenz96
// ---------------------------------------------------------------------------

/// Classical fourth-order Runge-Kutta step x + (dt/6)(k1 + 2 k2 + 2 k3 + k4).
Vector rk4_step(const VectorFn& drift, const Vector& x, double dt);

/// Cyclic Lorenz96 drift with external forcing:
/// drift_i = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + forcing_i.
Vector lorenz96_drift(const Vector& x, const Vector& forcing);

struct Lorenz96Config {
  int dim = 100;
  double delta = 0.05;
  int steps = 1000;
  double forcing_mean = 8.0;
  double forcing_sd = 1.0;
  double measurement_sd = 1.0;
  double p_eps = 0.001;
  double outlier_value = 100.0;
  double init_sd = 1.0;  // initial perturbation around the forcing mean
  int burn_in = 50;      // trajectory steps discarded before recording
};

struct Lorenz96Data {
  Vector initial_state;  // state after burn-in, before the first recorded step
  Matrix states;         // T x d
  Matrix measurements;   // T x d
  std::vector<std::vector<std::uint8_t>> outlier_mask;  // T x d
};

/// Integrates the forced Lorenz96 state with RK4 (forcing drawn once per step
/// and held fixed across stages), observes every component with unit Gaussian
/// noise, and independently replaces each entry by outlier_value with
/// probability p_eps.  Throws with the step index if the state diverges.
Lorenz96Data lorenz96_generate(const Lorenz96Config& cfg, RngStream& rng);

// ---------------------------------------------------------------------------
// Multi-layer perceptron observation model
// ---------------------------------------------------------------------------

/// Fully connected ReLU network with a linear scalar output.  Parameters are
/// flattened layer by layer, column-major weights first, then biases.
struct MlpSpec {
  std::vector<int> layer_sizes;  // e.g. {1, 10, 10, 1}

  explicit MlpSpec(std::vector<int> sizes);

  static MlpSpec regression_1d() { return MlpSpec({1, 10, 10, 1}); }
  static MlpSpec single_hidden(int n_in) { return MlpSpec({n_in, 20, 1}); }

  int param_count() const;
};

double mlp_apply(const MlpSpec& spec, const Vector& params, const Vector& x);

/// Gradient of the scalar output with respect to the parameters (manual
/// reverse mode; subgradient 0 at ReLU kinks).
Vector mlp_jacobian(const MlpSpec& spec, const Vector& params, const Vector& x);

/// Deterministic Gaussian parameter initialisation with 1/sqrt(fan_in)
/// weight scale and zero biases.
Vector mlp_init(const MlpSpec& spec, RngStream& rng);

// ---------------------------------------------------------------------------
// 1-d regression stream
// ---------------------------------------------------------------------------

struct RegressionSample {
  double x = 0.0;
  double y = 0.0;
  bool outlier = false;
};

/// Clean value of the 1-d regression target at x (no noise):
/// 0.2 x + 10 cos(pi x) + x^3.
double regression1d_clean(double x);

/// Stream of (x, y) pairs with y = 0.2 x + 10 cos(pi x) + x^3 + N(0, 3), each
/// measurement independently replaced by a U[-40, 40] draw with probability
/// p_eps.  With sorted_x the inputs are emitted in non-decreasing order.
std::vector<RegressionSample> regression1d_stream(int steps, double p_eps, bool sorted_x,
                                                  RngStream& rng);

// ---------------------------------------------------------------------------
// CSV regression ingestion (UCI-style protocol)
// ---------------------------------------------------------------------------

struct CsvDataset {
  Matrix features;  // T x n_in
  Vector targets;   // T
};

/// Reads a numeric CSV (with or without a header row) and splits off the
/// given target column; the remaining columns become features.
CsvDataset read_csv_dataset(const std::string& path, int target_column);

struct SupervisedSample {
  Vector x;
  double y = 0.0;
  bool outlier = false;
};

/// UCI-style preparation: shuffle rows, hold out the first warmup_fraction as
/// the normalisation split, min-max normalise the remainder with the warm-up
/// statistics, and corrupt each target with probability p_eps by a
/// U[-50, 50] draw.
std::vector<SupervisedSample> prepare_supervised_stream(const CsvDataset& data,
                                                        double warmup_fraction, double p_eps,
                                                        RngStream& rng);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Per-component scaled RMSE J_i = sqrt(sum_t (theta_{t,i} - mu_{t,i})^2);
/// no 1/T factor.
Vector metric_j(const Matrix& true_states, const Matrix& means);

/// Root median squared prediction error; even-length medians average the two
/// middle order statistics.
double metric_rmedse(const Vector& y, const Vector& yhat);

/// Per-step in-state RMSE sqrt((1/d) ||theta - mu||^2).
double metric_lt(const Vector& true_state, const Vector& mean);

struct BootstrapCi {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

/// Percentile bootstrap interval for the mean of the samples.
BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples, double level,
                              RngStream& rng);

/// Median with lower-upper midpoint averaging for even lengths.
double median(std::vector<double> values);

}  // namespace wolf
