#include "wolf/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace wolf {

// ---------------------------------------------------------------------------
// 2-d tracking
// ---------------------------------------------------------------------------

Matrix Tracking2dConfig::transition() const {
  Matrix f = Matrix::Identity(4, 4);
  f(0, 2) = delta;
  f(1, 3) = delta;
  return f;
}

Matrix Tracking2dConfig::observation() const {
  Matrix h = Matrix::Zero(2, 4);
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  return h;
}

Vector tracking2d_measurement_noise(const SpdMatrix& r, double tau, RngStream& rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("tracking2d_measurement_noise: tau must be positive");
  Vector z(r.dim());
  for (int i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
  return (r.factor() * z) / std::sqrt(tau);
}

TrackingData tracking2d_generate(const Tracking2dConfig& cfg, RngStream& rng) {
  if (cfg.steps < 1) throw std::invalid_argument("tracking2d_generate: steps must be >= 1");
  if (!(cfg.p_eps >= 0.0 && cfg.p_eps <= 1.0)) {
    throw std::invalid_argument("tracking2d_generate: p_eps must lie in [0, 1]");
  }
  const Matrix f = cfg.transition();
  const Matrix h = cfg.observation();
  const bool noisy_state = cfg.q > 0.0;
  const bool noisy_obs = cfg.r > 0.0;
  // Guard the zero-noise cases so the SPD factor stays well defined.
  const SpdMatrix q_cov(noisy_state ? cfg.process_cov()
                                    : Matrix(1e-300 * Matrix::Identity(4, 4)));
  const SpdMatrix r_cov(noisy_obs ? cfg.measurement_cov()
                                  : Matrix(1e-300 * Matrix::Identity(2, 2)));

  TrackingData data;
  data.states.resize(cfg.steps, 4);
  data.measurements.resize(cfg.steps, 2);
  data.outlier.assign(static_cast<size_t>(cfg.steps), 0);

  Vector state = cfg.initial_state;
  Vector z(4);
  for (int t = 0; t < cfg.steps; ++t) {
    state = f * state;
    if (noisy_state) {
      for (int i = 0; i < 4; ++i) z(i) = rng.next_normal();
      state += q_cov.factor() * z;
    }
    data.states.row(t) = state.transpose();

    Vector mean = h * state;
    double tau = 1.0;
    if (cfg.variant == TrackingVariant::kStudent) {
      tau = rng.next_gamma(0.5 * cfg.student_nu, 0.5 * cfg.student_nu);
    } else if (cfg.variant == TrackingVariant::kMixture) {
      if (rng.next_uniform() < cfg.p_eps) {
        mean *= 2.0;
        data.outlier[static_cast<size_t>(t)] = 1;
      }
    }
    Vector y = mean;
    if (noisy_obs) y += tracking2d_measurement_noise(r_cov, tau, rng);
    data.measurements.row(t) = y.transpose();
  }
  return data;
}

// ---------------------------------------------------------------------------
// Lorenz96
// ---------------------------------------------------------------------------

Vector rk4_step(const VectorFn& drift, const Vector& x, double dt) {
  const Vector k1 = drift(x);
  const Vector k2 = drift(x + 0.5 * dt * k1);
  const Vector k3 = drift(x + 0.5 * dt * k2);
  const Vector k4 = drift(x + dt * k3);
  if (!k1.allFinite() || !k2.allFinite() || !k3.allFinite() || !k4.allFinite()) {
    throw std::runtime_error("rk4_step: drift evaluated to a non-finite value");
  }
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector lorenz96_drift(const Vector& x, const Vector& forcing) {
  const int d = static_cast<int>(x.size());
  if (forcing.size() != d) throw std::invalid_argument("lorenz96_drift: forcing size mismatch");
  Vector out(d);
  for (int i = 0; i < d; ++i) {
    const int ip1 = (i + 1) % d;
    const int im1 = (i - 1 + d) % d;
    const int im2 = (i - 2 + 2 * d) % d;
    out(i) = (x(ip1) - x(im2)) * x(im1) - x(i) + forcing(i);
  }
  return out;
}

Lorenz96Data lorenz96_generate(const Lorenz96Config& cfg, RngStream& rng) {
  if (cfg.dim < 4) throw std::invalid_argument("lorenz96_generate: dim must be >= 4");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("lorenz96_generate: delta must be positive");
  const int d = cfg.dim;

  Vector state = Vector::Constant(d, cfg.forcing_mean);
  for (int i = 0; i < d; ++i) state(i) += cfg.init_sd * rng.next_normal();

  Vector forcing(d);
  const auto advance = [&](Vector& x) {
    for (int i = 0; i < d; ++i) forcing(i) = cfg.forcing_mean + cfg.forcing_sd * rng.next_normal();
    x = rk4_step([&](const Vector& s) { return lorenz96_drift(s, forcing); }, x, cfg.delta);
  };

  for (int t = 0; t < cfg.burn_in; ++t) advance(state);

  Lorenz96Data data;
  data.initial_state = state;
  data.states.resize(cfg.steps, d);
  data.measurements.resize(cfg.steps, d);
  data.outlier_mask.assign(static_cast<size_t>(cfg.steps),
                           std::vector<std::uint8_t>(static_cast<size_t>(d), 0));
  for (int t = 0; t < cfg.steps; ++t) {
    advance(state);
    if (!state.allFinite()) {
      throw std::runtime_error("lorenz96_generate: state diverged at step " + std::to_string(t));
    }
    data.states.row(t) = state.transpose();
    for (int i = 0; i < d; ++i) {
      data.measurements(t, i) = state(i) + cfg.measurement_sd * rng.next_normal();
    }
    for (int i = 0; i < d; ++i) {
      if (rng.next_uniform() < cfg.p_eps) {
        data.measurements(t, i) = cfg.outlier_value;
        data.outlier_mask[static_cast<size_t>(t)][static_cast<size_t>(i)] = 1;
      }
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

MlpSpec::MlpSpec(std::vector<int> sizes) : layer_sizes(std::move(sizes)) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("MlpSpec: needs at least two layers");
  for (int s : layer_sizes) {
    if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be positive");
  }
  if (layer_sizes.back() != 1) throw std::invalid_argument("MlpSpec: output must be scalar");
}

int MlpSpec::param_count() const {
  int count = 0;
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    count += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return count;
}

namespace {

struct MlpForward {
  std::vector<Vector> activations;      // per layer, post-activation (input first)
  std::vector<Vector> preactivations;   // per non-input layer
};

MlpForward mlp_forward(const MlpSpec& spec, const Vector& params, const Vector& x) {
  if (params.size() != spec.param_count()) {
    throw std::invalid_argument("mlp: parameter vector has wrong length");
  }
  if (x.size() != spec.layer_sizes.front()) {
    throw std::invalid_argument("mlp: input has wrong length");
  }
  MlpForward fwd;
  fwd.activations.push_back(x);
  int offset = 0;
  const size_t n_layers = spec.layer_sizes.size();
  for (size_t l = 0; l + 1 < n_layers; ++l) {
    const int n_in = spec.layer_sizes[l];
    const int n_out = spec.layer_sizes[l + 1];
    const Eigen::Map<const Matrix> w(params.data() + offset, n_out, n_in);
    offset += n_out * n_in;
    const Eigen::Map<const Vector> b(params.data() + offset, n_out);
    offset += n_out;
    Vector z = w * fwd.activations.back() + b;
    fwd.preactivations.push_back(z);
    const bool last = (l + 2 == n_layers);
    fwd.activations.push_back(last ? z : z.cwiseMax(0.0));
  }
  return fwd;
}

}  // namespace

double mlp_apply(const MlpSpec& spec, const Vector& params, const Vector& x) {
  return mlp_forward(spec, params, x).activations.back()(0);
}

Vector mlp_jacobian(const MlpSpec& spec, const Vector& params, const Vector& x) {
  const MlpForward fwd = mlp_forward(spec, params, x);
  const size_t n_layers = spec.layer_sizes.size();
  Vector grad = Vector::Zero(params.size());

  // delta starts at the scalar output and is pulled back layer by layer.
  Vector delta = Vector::Ones(1);
  int offset = static_cast<int>(params.size());
  for (size_t l = n_layers - 1; l >= 1; --l) {
    const int n_in = spec.layer_sizes[l - 1];
    const int n_out = spec.layer_sizes[l];
    offset -= n_out * n_in + n_out;
    const Eigen::Map<const Matrix> w(params.data() + offset, n_out, n_in);

    grad.segment(offset + n_out * n_in, n_out) = delta;  // bias gradient
    Eigen::Map<Matrix> gw(grad.data() + offset, n_out, n_in);
    gw = delta * fwd.activations[l - 1].transpose();     // weight gradient

    if (l >= 2) {
      Vector back = w.transpose() * delta;
      const Vector& z = fwd.preactivations[l - 2];
      for (int i = 0; i < back.size(); ++i) {
        if (z(i) <= 0.0) back(i) = 0.0;  // subgradient 0 at the kink
      }
      delta = std::move(back);
    }
  }
  return grad;
}

Vector mlp_init(const MlpSpec& spec, RngStream& rng) {
  Vector params = Vector::Zero(spec.param_count());
  int offset = 0;
  for (size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const int n_in = spec.layer_sizes[l];
    const int n_out = spec.layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (int k = 0; k < n_out * n_in; ++k) params(offset + k) = scale * rng.next_normal();
    offset += n_out * n_in + n_out;  // biases stay zero
  }
  return params;
}

// ---------------------------------------------------------------------------
// 1-d regression stream
// ---------------------------------------------------------------------------

double regression1d_clean(double x) {
  // theta* = (0.2, -10, 1.0, 1.0) in t1 x - t2 cos(t3 pi x) + t4 x^3.
  return 0.2 * x + 10.0 * std::cos(M_PI * x) + x * x * x;
}

std::vector<RegressionSample> regression1d_stream(int steps, double p_eps, bool sorted_x,
                                                  RngStream& rng) {
  if (steps < 1) throw std::invalid_argument("regression1d_stream: steps must be >= 1");
  std::vector<double> xs(static_cast<size_t>(steps));
  for (auto& x : xs) x = -3.0 + 6.0 * rng.next_uniform();
  if (sorted_x) std::sort(xs.begin(), xs.end());

  std::vector<RegressionSample> out(static_cast<size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    RegressionSample s;
    s.x = xs[static_cast<size_t>(t)];
    if (rng.next_uniform() < p_eps) {
      s.y = -40.0 + 80.0 * rng.next_uniform();
      s.outlier = true;
    } else {
      s.y = regression1d_clean(s.x) + std::sqrt(3.0) * rng.next_normal();
    }
    out[static_cast<size_t>(t)] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

CsvDataset read_csv_dataset(const std::string& path, int target_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv_dataset: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (first && !numeric) {
      first = false;  // header row
      continue;
    }
    first = false;
    if (!numeric) throw std::runtime_error("read_csv_dataset: non-numeric row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_csv_dataset: no data rows in " + path);
  const int n_cols = static_cast<int>(rows.front().size());
  if (target_column < 0) target_column += n_cols;
  if (target_column < 0 || target_column >= n_cols) {
    throw std::invalid_argument("read_csv_dataset: target column out of range");
  }
  CsvDataset data;
  data.features.resize(static_cast<int>(rows.size()), n_cols - 1);
  data.targets.resize(static_cast<int>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != n_cols) {
      throw std::runtime_error("read_csv_dataset: ragged rows in " + path);
    }
    int k = 0;
    for (int j = 0; j < n_cols; ++j) {
      if (j == target_column) {
        data.targets(static_cast<int>(i)) = rows[i][static_cast<size_t>(j)];
      } else {
        data.features(static_cast<int>(i), k++) = rows[i][static_cast<size_t>(j)];
      }
    }
  }
  return data;
}

std::vector<SupervisedSample> prepare_supervised_stream(const CsvDataset& data,
                                                        double warmup_fraction, double p_eps,
                                                        RngStream& rng) {
  const int n = static_cast<int>(data.targets.size());
  if (n < 2) throw std::invalid_argument("prepare_supervised_stream: needs at least two rows");
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the stream's uniform draws.
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_uniform() * (i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(std::min(j, i))]);
  }
  const int warmup = std::max(1, static_cast<int>(warmup_fraction * n));
  const int n_cols = static_cast<int>(data.features.cols());

  Vector x_min = Vector::Constant(n_cols, std::numeric_limits<double>::infinity());
  Vector x_max = Vector::Constant(n_cols, -std::numeric_limits<double>::infinity());
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -y_min;
  for (int i = 0; i < warmup; ++i) {
    const int row = order[static_cast<size_t>(i)];
    x_min = x_min.cwiseMin(data.features.row(row).transpose());
    x_max = x_max.cwiseMax(data.features.row(row).transpose());
    y_min = std::min(y_min, data.targets(row));
    y_max = std::max(y_max, data.targets(row));
  }
  const Vector x_range = (x_max - x_min).cwiseMax(1e-12);
  const double y_range = std::max(y_max - y_min, 1e-12);

  std::vector<SupervisedSample> out;
  out.reserve(static_cast<size_t>(n - warmup));
  for (int i = warmup; i < n; ++i) {
    const int row = order[static_cast<size_t>(i)];
    SupervisedSample s;
    s.x = (data.features.row(row).transpose() - x_min).cwiseQuotient(x_range);
    s.y = (data.targets(row) - y_min) / y_range;
    if (rng.next_uniform() < p_eps) {
      s.y = -50.0 + 100.0 * rng.next_uniform();
      s.outlier = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Vector metric_j(const Matrix& true_states, const Matrix& means) {
  if (true_states.rows() != means.rows() || true_states.cols() != means.cols()) {
    throw std::invalid_argument("metric_j: shape mismatch");
  }
  return (true_states - means).colwise().squaredNorm().cwiseSqrt().transpose();
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double metric_rmedse(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("metric_rmedse: length mismatch");
  if (y.size() == 0) throw std::invalid_argument("metric_rmedse: empty input");
  std::vector<double> sq(static_cast<size_t>(y.size()));
  for (int t = 0; t < y.size(); ++t) {
    const double e = y(t) - yhat(t);
    sq[static_cast<size_t>(t)] = e * e;
  }
  return std::sqrt(median(std::move(sq)));
}

double metric_lt(const Vector& true_state, const Vector& mean) {
  if (true_state.size() != mean.size()) throw std::invalid_argument("metric_lt: length mismatch");
  return std::sqrt((true_state - mean).squaredNorm() / static_cast<double>(true_state.size()));
}

BootstrapCi bootstrap_mean_ci(const std::vector<double>& samples, int resamples, double level,
                              RngStream& rng) {
  if (samples.size() < 2) throw std::invalid_argument("bootstrap_mean_ci: needs >= 2 samples");
  if (resamples < 100) throw std::invalid_argument("bootstrap_mean_ci: needs >= 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_mean_ci: bad level");

  const size_t n = samples.size();
  std::vector<double> means(static_cast<size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const size_t idx = std::min(n - 1, static_cast<size_t>(rng.next_uniform() * n));
      sum += samples[idx];
    }
    means[static_cast<size_t>(b)] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto quantile = [&](double q) {
    const double pos = q * (resamples - 1);
    const int lo = static_cast<int>(std::floor(pos));
    const int hi = std::min(resamples - 1, lo + 1);
    const double frac = pos - lo;
    return (1.0 - frac) * means[static_cast<size_t>(lo)] + frac * means[static_cast<size_t>(hi)];
  };
  BootstrapCi ci;
  ci.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  ci.low = quantile(0.5 * (1.0 - level));
  ci.high = quantile(1.0 - 0.5 * (1.0 - level));
  return ci;
}

}  // namespace wolf
