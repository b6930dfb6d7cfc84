#include "wolf/harness.hpp"

#include "wolf/baselines.hpp"
#include "wolf/ensemble_filters.hpp"
#include "wolf/gaussian_filters.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace wolf {
namespace {

// ---------------------------------------------------------------------------
// Small utilities
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size() || !std::isfinite(v)) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' needs a finite number, got '" + value + "'");
  }
}

long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' needs an integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: key '" + key + "' needs true/false, got '" + value + "'");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::int64_t elapsed_ns(const std::chrono::steady_clock::time_point& a,
                        const std::chrono::steady_clock::time_point& b) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
}

std::int64_t median_ns(std::vector<std::int64_t> ns, int steps) {
  // Warm-up exclusion: the first min(100, steps/5) steps do not count.
  const int skip = std::min<int>(100, steps / 5);
  if (static_cast<int>(ns.size()) > skip) ns.erase(ns.begin(), ns.begin() + skip);
  if (ns.empty()) return 0;
  std::sort(ns.begin(), ns.end());
  return ns[ns.size() / 2];
}

WeightSpec weight_spec_for(const FilterConfig& f) {
  if (f.kind == "kf" || f.kind == "ekf") return WeightSpec::constant(1.0);
  if (f.kind == "wolf-const") return WeightSpec::constant(f.w0);
  if (f.kind == "wolf-imq") return WeightSpec::imq(f.c);
  if (f.kind == "wolf-md") return WeightSpec::md(f.c);
  if (f.kind == "wolf-tmd") return WeightSpec::tmd(f.c);
  if (f.kind == "wolf-pdtmd") return WeightSpec::per_dim_tmd(f.c);
  throw ConfigError("filter kind '" + f.kind + "' has no weighting function");
}

bool is_wolf_kind(const std::string& kind) {
  return kind == "kf" || kind == "ekf" || kind == "wolf-const" || kind == "wolf-imq" ||
         kind == "wolf-md" || kind == "wolf-tmd" || kind == "wolf-pdtmd";
}

bool is_ensemble_kind(const std::string& kind) {
  return kind == "enkf" || kind == "ap-enkf" || kind == "pp-enkf" || kind == "hub-enkf";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);

  ExperimentConfig cfg;
  std::map<int, FilterConfig> filters;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key.rfind("filter.", 0) == 0) {
      const auto dot = key.find('.', 7);
      if (dot == std::string::npos) throw ConfigError("config: malformed filter key '" + key + "'");
      const int idx = static_cast<int>(parse_int(key, key.substr(7, dot - 7)));
      const std::string field = key.substr(dot + 1);
      FilterConfig& f = filters[idx];
      if (field == "kind") f.kind = value;
      else if (field == "label") f.label = value;
      else if (field == "c") f.c = parse_double(key, value);
      else if (field == "w0") f.w0 = parse_double(key, value);
      else if (field == "ell") f.ell = parse_double(key, value);
      else if (field == "alpha0") f.alpha0 = parse_double(key, value);
      else if (field == "beta0") f.beta0 = parse_double(key, value);
      else if (field == "tol") f.tol = parse_double(key, value);
      else if (field == "inner_iters") f.inner_iters = static_cast<int>(parse_int(key, value));
      else if (field == "learning_rate") f.learning_rate = parse_double(key, value);
      else if (field == "inflation") f.inflation = parse_double(key, value);
      else throw ConfigError("config: unknown filter field '" + field + "'");
      continue;
    }

    if (key == "scenario.kind") cfg.scenario = value;
    else if (key == "trials") cfg.trials = static_cast<int>(parse_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "out") cfg.out_dir = value;
    else if (key == "jobs") cfg.jobs = static_cast<int>(parse_int(key, value));
    else if (key == "reference") cfg.reference = value;
    else if (key == "timing.enabled") cfg.timing_enabled = parse_bool(key, value);
    else if (key == "scenario.variant") {
      if (value == "clean") cfg.tracking.variant = TrackingVariant::kClean;
      else if (value == "student") cfg.tracking.variant = TrackingVariant::kStudent;
      else if (value == "mixture") cfg.tracking.variant = TrackingVariant::kMixture;
      else throw ConfigError("config: unknown tracking variant '" + value + "'");
    } else if (key == "scenario.steps") {
      const int steps = static_cast<int>(parse_int(key, value));
      cfg.tracking.steps = steps;
      cfg.lorenz.steps = steps;
      cfg.regression_steps = steps;
    } else if (key == "scenario.delta") {
      cfg.tracking.delta = parse_double(key, value);
      cfg.lorenz.delta = cfg.tracking.delta;
    } else if (key == "scenario.q") cfg.tracking.q = parse_double(key, value);
    else if (key == "scenario.r") {
      const double r = parse_double(key, value);
      cfg.tracking.r = r;
      cfg.regression_r = r;
    }
    else if (key == "scenario.nu") cfg.tracking.student_nu = parse_double(key, value);
    else if (key == "scenario.p_eps") {
      const double p = parse_double(key, value);
      cfg.tracking.p_eps = p;
      cfg.lorenz.p_eps = p;
      cfg.regression_p_eps = p;
    } else if (key == "scenario.dim") cfg.lorenz.dim = static_cast<int>(parse_int(key, value));
    else if (key == "scenario.outlier_value") cfg.lorenz.outlier_value = parse_double(key, value);
    else if (key == "scenario.forcing_sd") cfg.lorenz.forcing_sd = parse_double(key, value);
    else if (key == "scenario.measurement_sd") cfg.lorenz.measurement_sd = parse_double(key, value);
    else if (key == "scenario.init_sd") cfg.lorenz.init_sd = parse_double(key, value);
    else if (key == "scenario.burn_in") cfg.lorenz.burn_in = static_cast<int>(parse_int(key, value));
    else if (key == "scenario.particles") cfg.particles = static_cast<int>(parse_int(key, value));
    else if (key == "scenario.sorted") cfg.regression_sorted = parse_bool(key, value);
    else if (key == "scenario.csv") cfg.csv_path = value;
    else if (key == "scenario.csv_target") cfg.csv_target_column = static_cast<int>(parse_int(key, value));
    else if (key == "scenario.csv_warmup") cfg.csv_warmup_fraction = parse_double(key, value);
    else if (key == "pif.min") cfg.pif_grid_spec.eps_min = parse_double(key, value);
    else if (key == "pif.max") cfg.pif_grid_spec.eps_max = parse_double(key, value);
    else if (key == "pif.points") cfg.pif_grid_spec.points_per_axis = static_cast<int>(parse_int(key, value));
    else if (key == "pif.history") cfg.pif_history = static_cast<int>(parse_int(key, value));
    else if (key == "pif.reverse") cfg.pif_reverse = parse_bool(key, value);
    else if (key == "sweep.parameter") {
      if (!cfg.sweep) cfg.sweep = SweepAxis{};
      cfg.sweep->parameter = value;
    } else if (key == "sweep.values") {
      if (!cfg.sweep) cfg.sweep = SweepAxis{};
      std::stringstream ss(value);
      std::string item;
      cfg.sweep->values.clear();
      while (std::getline(ss, item, ',')) {
        cfg.sweep->values.push_back(parse_double(key, trim(item)));
      }
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  for (auto& [idx, f] : filters) {
    if (f.kind.empty()) {
      throw ConfigError("config: filter." + std::to_string(idx) + " is missing its kind");
    }
    if (f.label.empty()) f.label = f.kind;
    cfg.filters.push_back(f);
  }
  if (cfg.filters.empty()) throw ConfigError("config: at least one filter is required");
  {
    std::set<std::string> labels;
    for (const auto& f : cfg.filters) {
      if (!labels.insert(f.label).second) {
        throw ConfigError("config: duplicate filter label '" + f.label +
                          "' (set filter.N.label to disambiguate)");
      }
    }
  }
  if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
  if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (cfg.reference.empty()) cfg.reference = cfg.filters.front().label;
  if (cfg.sweep && (cfg.sweep->parameter.empty() || cfg.sweep->values.empty())) {
    throw ConfigError("config: sweep needs both sweep.parameter and sweep.values");
  }
  return cfg;
}

void apply_cli_overrides(ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                         std::optional<std::string> out_dir, std::optional<int> trials,
                         std::optional<int> jobs) {
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.out_dir = *out_dir;
  if (trials) {
    if (*trials < 1) throw ConfigError("trials must be >= 1");
    cfg.trials = *trials;
  }
  if (jobs) {
    if (*jobs < 1) throw ConfigError("jobs must be >= 1");
    cfg.jobs = *jobs;
  }
}

// ---------------------------------------------------------------------------
// Filter runners
// ---------------------------------------------------------------------------

FilterRunResult run_tracking_filter(const FilterConfig& filter, const Tracking2dConfig& scenario,
                                    const TrackingData& data, bool timing_enabled) {
  const int steps = static_cast<int>(data.measurements.rows());
  const LinearDynamics dyn(scenario.transition(), scenario.process_cov());
  const LinearObservation obs(scenario.observation(), scenario.measurement_cov());

  FilterRunResult out;
  out.metric_names = {"j0", "j1", "j2", "j3"};
  Matrix means(steps, 4);
  std::vector<std::int64_t> step_ns;
  step_ns.reserve(static_cast<size_t>(steps));
  double weight_sum = 0.0;

  GaussianBelief belief(scenario.initial_state, Matrix::Identity(4, 4));
  const bool wolf_family = is_wolf_kind(filter.kind);
  WeightSpec spec = wolf_family ? weight_spec_for(filter) : WeightSpec::constant(1.0);
  const KfIwConfig iw_cfg =
      filter.kind == "kf-iw"
          ? KfIwConfig(filter.ell, filter.inner_iters, scenario.measurement_cov())
          : KfIwConfig(1.0, 1, Matrix::Identity(2, 2));
  const KfBConfig b_cfg = KfBConfig(filter.alpha0, filter.beta0,
                                    std::max(1, filter.inner_iters), filter.tol);

  try {
    for (int t = 0; t < steps; ++t) {
      const Vector y = data.measurements.row(t).transpose();
      const auto t0 = std::chrono::steady_clock::now();
      const GaussianBelief pred = kf_predict(belief, dyn);
      double step_weight = 1.0;
      if (filter.kind == "kf") {
        belief = kf_update(pred, obs, y).posterior;
      } else if (filter.kind == "kf-iw") {
        belief = kfiw_update(pred, obs, y, iw_cfg);
      } else if (filter.kind == "kf-b") {
        belief = kfb_update(pred, obs, y, b_cfg);
      } else if (filter.kind == "wolf-pdtmd") {
        const Vector w = compute_weight_vector(spec, y, obs.h * pred.mean,
                                               obs.r.matrix().diagonal());
        auto upd = wolf_update_dimwise(pred, obs, y, w);
        step_weight = upd.weight.mean();
        belief = std::move(upd.posterior);
      } else if (wolf_family) {
        auto upd = wolf_update(pred, obs, y, spec);
        step_weight = upd.weight(0);
        belief = std::move(upd.posterior);
      } else {
        throw ConfigError("filter kind '" + filter.kind + "' is not a track2d filter");
      }
      if (timing_enabled) {
        step_ns.push_back(elapsed_ns(t0, std::chrono::steady_clock::now()));
      }
      weight_sum += step_weight;
      means.row(t) = belief.mean.transpose();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    out.diverged = true;
  }

  if (out.diverged) {
    out.metrics.assign(4, std::numeric_limits<double>::quiet_NaN());
  } else {
    const Vector j = metric_j(data.states, means);
    out.metrics = {j(0), j(1), j(2), j(3)};
  }
  out.mean_weight = weight_sum / steps;
  out.median_step_ns = timing_enabled ? median_ns(std::move(step_ns), steps) : 0;
  for (auto flag : data.outlier) out.outlier_steps += flag;
  return out;
}

FilterRunResult run_lorenz_filter(const FilterConfig& filter, const Lorenz96Config& scenario,
                                  const Lorenz96Data& data, const Matrix& initial_ensemble,
                                  RngStream rng, bool timing_enabled) {
  const int steps = static_cast<int>(data.measurements.rows());
  const int d = scenario.dim;
  if (!is_ensemble_kind(filter.kind)) {
    throw ConfigError("filter kind '" + filter.kind + "' is not a lorenz96 filter");
  }

  // Filter model: deterministic RK4 of the mean-forcing drift; the forcing
  // spread enters as additive process noise integrated over one step.
  const Vector mean_forcing = Vector::Constant(d, scenario.forcing_mean);
  const double q_var =
      std::max(scenario.delta * scenario.delta * scenario.forcing_sd * scenario.forcing_sd, 1e-12);
  const double delta = scenario.delta;
  const NonlinearModel model(
      [mean_forcing, delta](const Vector& x) {
        return rk4_step([&](const Vector& s) { return lorenz96_drift(s, mean_forcing); }, x, delta);
      },
      [](const Vector& x) { return x; }, q_var * Matrix::Identity(d, d),
      scenario.measurement_sd * scenario.measurement_sd * Matrix::Identity(d, d));

  FilterRunResult out;
  out.metric_names = {"lt_mean", "lt_final"};
  std::vector<std::int64_t> step_ns;
  double weight_sum = 0.0;
  double lt_sum = 0.0;
  double lt_final = 0.0;

  try {
    Ensemble ens(initial_ensemble);
    for (int t = 0; t < steps; ++t) {
      const Vector y = data.measurements.row(t).transpose();
      const auto t0 = std::chrono::steady_clock::now();
      ens = enkf_predict(ens, model, rng);
      double step_weight = 1.0;
      if (filter.kind == "enkf") {
        ens = enkf_update(ens, model, y, rng);
      } else if (filter.kind == "ap-enkf") {
        auto [updated, w] = ap_enkf_update(ens, model, y, filter.c, rng);
        ens = std::move(updated);
        step_weight = w.mean();
      } else if (filter.kind == "pp-enkf") {
        auto [updated, w] = pp_enkf_update(ens, model, y, filter.c, rng);
        ens = std::move(updated);
        step_weight = w.mean();
      } else {
        ens = hub_enkf_update(ens, model, y, filter.c, rng);
      }
      if (filter.inflation > 1.0) ens = inflate(ens, filter.inflation);
      if (timing_enabled) {
        step_ns.push_back(elapsed_ns(t0, std::chrono::steady_clock::now()));
      }
      weight_sum += step_weight;
      const double lt = metric_lt(data.states.row(t).transpose(), ens.mean());
      lt_sum += lt;
      lt_final = lt;
    }
  } catch (const std::exception&) {
    out.diverged = true;
  }

  if (out.diverged) {
    out.metrics.assign(2, std::numeric_limits<double>::quiet_NaN());
  } else {
    out.metrics = {lt_sum / steps, lt_final};
  }
  out.mean_weight = weight_sum / steps;
  out.median_step_ns = timing_enabled ? median_ns(std::move(step_ns), steps) : 0;
  for (const auto& mask : data.outlier_mask) {
    for (auto flag : mask) {
      if (flag) {
        ++out.outlier_steps;
        break;
      }
    }
  }
  return out;
}

FilterRunResult run_regression_filter(const FilterConfig& filter,
                                      const std::vector<RegressionSample>& stream,
                                      const Vector& initial_params, double modelled_r,
                                      bool timing_enabled) {
  const int steps = static_cast<int>(stream.size());
  const MlpSpec spec = MlpSpec::regression_1d();
  const int m = spec.param_count();
  if (initial_params.size() != m) {
    throw std::invalid_argument("run_regression_filter: bad initial parameter length");
  }
  const double r_var = modelled_r;  // modelled measurement noise variance
  const double q_var = 1e-4;        // slow parameter drift
  const LinearDynamics dyn(Matrix::Identity(m, m), q_var * Matrix::Identity(m, m));

  // The observation closure reads the exogenous input for the current step.
  double current_x = 0.0;
  const NonlinearModel model(
      [](const Vector& x) { return x; },
      [&current_x, &spec](const Vector& params) {
        Vector out(1);
        out << mlp_apply(spec, params, Vector::Constant(1, current_x));
        return out;
      },
      q_var * Matrix::Identity(m, m), r_var * Matrix::Identity(1, 1), std::nullopt,
      JacobianFn([&current_x, &spec](const Vector& params) {
        return Matrix(mlp_jacobian(spec, params, Vector::Constant(1, current_x)).transpose());
      }));

  const bool wolf_family = is_wolf_kind(filter.kind);
  const WeightSpec wspec = wolf_family ? weight_spec_for(filter) : WeightSpec::constant(1.0);
  const KfIwConfig iw_cfg = filter.kind == "kf-iw"
                                ? KfIwConfig(filter.ell, filter.inner_iters,
                                             r_var * Matrix::Identity(1, 1))
                                : KfIwConfig(1.0, 1, Matrix::Identity(1, 1));
  const KfBConfig b_cfg = KfBConfig(filter.alpha0, filter.beta0,
                                    std::max(1, filter.inner_iters), filter.tol);

  FilterRunResult out;
  out.metric_names = {"rmedse"};
  Vector y_obs(steps), y_pred(steps);
  std::vector<std::int64_t> step_ns;
  double weight_sum = 0.0;

  try {
    if (filter.kind == "ogd") {
      AdamState adam = AdamState::init(m, filter.learning_rate, std::max(1, filter.inner_iters));
      Vector params = initial_params;
      for (int t = 0; t < steps; ++t) {
        current_x = stream[static_cast<size_t>(t)].x;
        const double y = stream[static_cast<size_t>(t)].y;
        const Vector x_vec = Vector::Constant(1, current_x);
        y_obs(t) = y;
        y_pred(t) = mlp_apply(spec, params, x_vec);
        const auto t0 = std::chrono::steady_clock::now();
        auto [updated, state] = adam_ogd_step(
            params,
            [&](const Vector& p) {
              const double pred = mlp_apply(spec, p, x_vec);
              return Vector((pred - y) * mlp_jacobian(spec, p, x_vec));
            },
            std::move(adam));
        params = std::move(updated);
        adam = std::move(state);
        if (timing_enabled) {
          step_ns.push_back(elapsed_ns(t0, std::chrono::steady_clock::now()));
        }
        weight_sum += 1.0;
      }
    } else {
      GaussianBelief belief(initial_params, Matrix::Identity(m, m));
      for (int t = 0; t < steps; ++t) {
        current_x = stream[static_cast<size_t>(t)].x;
        const double y = stream[static_cast<size_t>(t)].y;
        Vector y_vec(1);
        y_vec << y;
        y_obs(t) = y;

        const auto t0 = std::chrono::steady_clock::now();
        const GaussianBelief pred = kf_predict(belief, dyn);
        const Vector yhat = model.h(pred.mean);
        double step_weight = 1.0;
        if (filter.kind == "kf-iw" || filter.kind == "kf-b") {
          // Linearise h around the predictive mean and fold the offset into a
          // pseudo-measurement so the linear baselines see y - h(theta).
          const Matrix h_jac = jacobian(model.h, model.h_jacobian, pred.mean);
          const LinearObservation obs_lin(h_jac, r_var * Matrix::Identity(1, 1));
          const Vector y_lin = y_vec - yhat + h_jac * pred.mean;
          belief = filter.kind == "kf-iw" ? kfiw_update(pred, obs_lin, y_lin, iw_cfg)
                                          : kfb_update(pred, obs_lin, y_lin, b_cfg);
        } else if (wolf_family) {
          auto upd = ekf_update(pred, model, y_vec, wspec);
          step_weight = upd.weight(0);
          belief = std::move(upd.posterior);
        } else {
          throw ConfigError("filter kind '" + filter.kind + "' is not a regress1d filter");
        }
        if (timing_enabled) {
          step_ns.push_back(elapsed_ns(t0, std::chrono::steady_clock::now()));
        }
        weight_sum += step_weight;
        y_pred(t) = yhat(0);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    out.diverged = true;
  }

  if (out.diverged) {
    out.metrics.assign(1, std::numeric_limits<double>::quiet_NaN());
  } else {
    out.metrics = {metric_rmedse(y_obs, y_pred)};
  }
  out.mean_weight = weight_sum / steps;
  out.median_step_ns = timing_enabled ? median_ns(std::move(step_ns), steps) : 0;
  for (const auto& s : stream) out.outlier_steps += s.outlier ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

namespace {

std::vector<ExperimentRow> run_one_trial(const ExperimentConfig& cfg, int trial) {
  const RngStream base(cfg.seed, static_cast<std::uint64_t>(trial));
  RngStream data_rng = base.split(0);
  RngStream init_rng = base.split(1);

  std::vector<ExperimentRow> rows;
  rows.reserve(cfg.filters.size());

  if (cfg.scenario == "track2d") {
    const TrackingData data = tracking2d_generate(cfg.tracking, data_rng);
    for (const auto& f : cfg.filters) {
      ExperimentRow row{trial, f.label, cfg.tracking.steps,
                        run_tracking_filter(f, cfg.tracking, data, cfg.timing_enabled)};
      rows.push_back(std::move(row));
    }
  } else if (cfg.scenario == "lorenz96") {
    const Lorenz96Data data = lorenz96_generate(cfg.lorenz, data_rng);
    Matrix init(cfg.particles, cfg.lorenz.dim);
    for (int i = 0; i < cfg.particles; ++i) {
      for (int j = 0; j < cfg.lorenz.dim; ++j) {
        init(i, j) = data.initial_state(j) + init_rng.next_normal();
      }
    }
    for (size_t k = 0; k < cfg.filters.size(); ++k) {
      RngStream filter_rng = base.split(100 + k);
      ExperimentRow row{trial, cfg.filters[k].label, cfg.lorenz.steps,
                        run_lorenz_filter(cfg.filters[k], cfg.lorenz, data, init, filter_rng,
                                          cfg.timing_enabled)};
      rows.push_back(std::move(row));
    }
  } else if (cfg.scenario == "regress1d") {
    std::vector<RegressionSample> stream;
    if (!cfg.csv_path.empty()) {
      const CsvDataset csv = read_csv_dataset(cfg.csv_path, cfg.csv_target_column);
      if (csv.features.cols() != 1) {
        throw ConfigError("regress1d: external CSV must have exactly one feature column");
      }
      const auto samples = prepare_supervised_stream(csv, cfg.csv_warmup_fraction,
                                                     cfg.regression_p_eps, data_rng);
      for (const auto& s : samples) stream.push_back({s.x(0), s.y, s.outlier});
    } else {
      stream = regression1d_stream(cfg.regression_steps, cfg.regression_p_eps,
                                   cfg.regression_sorted, data_rng);
    }
    const Vector init = mlp_init(MlpSpec::regression_1d(), init_rng);
    for (const auto& f : cfg.filters) {
      ExperimentRow row{trial, f.label, static_cast<int>(stream.size()),
                        run_regression_filter(f, stream, init, cfg.regression_r,
                                              cfg.timing_enabled)};
      rows.push_back(std::move(row));
    }
  } else {
    throw ConfigError("unknown scenario '" + cfg.scenario + "'");
  }
  return rows;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open output file " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("failed while writing " + path);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir);
}

}  // namespace

std::vector<ExperimentRow> run_experiment_rows(const ExperimentConfig& cfg) {
  std::vector<std::vector<ExperimentRow>> per_trial(static_cast<size_t>(cfg.trials));
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const int jobs = std::max(1, std::min(cfg.jobs, cfg.trials));
  std::atomic<int> next_trial{0};
  auto worker = [&]() {
    while (true) {
      const int trial = next_trial.fetch_add(1);
      if (trial >= cfg.trials) return;
      try {
        per_trial[static_cast<size_t>(trial)] = run_one_trial(cfg, trial);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<ExperimentRow> rows;
  rows.reserve(static_cast<size_t>(cfg.trials) * cfg.filters.size());
  for (auto& trial_rows : per_trial) {
    for (auto& r : trial_rows) rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::vector<std::string> results_csv_lines(const std::vector<ExperimentRow>& rows) {
  std::vector<std::string> lines;
  if (rows.empty()) return lines;
  std::string header = "trial,filter,steps";
  for (const auto& name : rows.front().result.metric_names) header += "," + name;
  header += ",mean_weight,median_step_time_ns,outlier_steps,diverged";
  lines.push_back(header);
  for (const auto& row : rows) {
    std::string line = std::to_string(row.trial) + "," + row.filter + "," +
                       std::to_string(row.steps);
    for (double v : row.result.metrics) line += "," + fmt(v);
    line += "," + fmt(row.result.mean_weight);
    line += "," + std::to_string(row.result.median_step_ns);
    line += "," + std::to_string(row.result.outlier_steps);
    line += ",";
    line += row.result.diverged ? "1" : "0";
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> summary_csv_lines(const ExperimentConfig& cfg,
                                           const std::vector<ExperimentRow>& rows) {
  std::vector<std::string> lines;
  lines.push_back("filter,metric,median,mean,bootstrap_low,bootstrap_high,slowdown_vs_reference");
  if (rows.empty()) return lines;
  const auto& metric_names = rows.front().result.metric_names;

  // Median per-step time per filter, for the slowdown column.
  std::map<std::string, double> median_step;
  for (const auto& f : cfg.filters) {
    std::vector<double> ns;
    for (const auto& row : rows) {
      if (row.filter == f.label && !row.result.diverged) {
        ns.push_back(static_cast<double>(row.result.median_step_ns));
      }
    }
    median_step[f.label] = ns.empty() ? 0.0 : median(std::move(ns));
  }
  const double ref_ns = median_step.count(cfg.reference) ? median_step[cfg.reference] : 0.0;

  int bootstrap_id = 0;
  for (const auto& f : cfg.filters) {
    const double slowdown = ref_ns > 0.0 ? median_step[f.label] / ref_ns
                                         : std::numeric_limits<double>::quiet_NaN();
    for (size_t mi = 0; mi < metric_names.size(); ++mi) {
      std::vector<double> values;
      for (const auto& row : rows) {
        if (row.filter == f.label && !row.result.diverged) {
          values.push_back(row.result.metrics[mi]);
        }
      }
      ++bootstrap_id;
      std::string line = f.label + "," + metric_names[mi];
      if (values.size() >= 2) {
        RngStream boot_rng = RngStream(cfg.seed, 0xb007u).split(bootstrap_id);
        const BootstrapCi ci = bootstrap_mean_ci(values, 500, 0.95, boot_rng);
        line += "," + fmt(median(values)) + "," + fmt(ci.mean) + "," + fmt(ci.low) + "," +
                fmt(ci.high);
      } else if (values.size() == 1) {
        line += "," + fmt(values[0]) + "," + fmt(values[0]) + "," + fmt(values[0]) + "," +
                fmt(values[0]);
      } else {
        line += ",nan,nan,nan,nan";
      }
      line += "," + fmt(slowdown);
      lines.push_back(std::move(line));
    }
  }
  return lines;
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  const auto rows = run_experiment_rows(cfg);
  ensure_out_dir(cfg.out_dir);
  write_lines(cfg.out_dir + "/results.csv", results_csv_lines(rows));
  write_lines(cfg.out_dir + "/summary.csv", summary_csv_lines(cfg, rows));
}

namespace {

bool parameter_applies(const std::string& parameter, const std::string& kind) {
  if (parameter == "c") {
    return kind == "wolf-imq" || kind == "wolf-md" || kind == "wolf-tmd" ||
           kind == "wolf-pdtmd" || kind == "ap-enkf" || kind == "pp-enkf" || kind == "hub-enkf";
  }
  if (parameter == "ell") return kind == "kf-iw";
  if (parameter == "alpha0" || parameter == "beta0" || parameter == "tol") return kind == "kf-b";
  if (parameter == "learning_rate") return kind == "ogd";
  if (parameter == "inner_iters") return kind == "kf-iw" || kind == "kf-b" || kind == "ogd";
  if (parameter == "inflation") return is_ensemble_kind(kind);
  if (parameter == "w0") return kind == "wolf-const";
  return false;
}

void set_parameter(FilterConfig& f, const std::string& parameter, double value) {
  if (parameter == "c") f.c = value;
  else if (parameter == "ell") f.ell = value;
  else if (parameter == "alpha0") f.alpha0 = value;
  else if (parameter == "beta0") f.beta0 = value;
  else if (parameter == "tol") f.tol = value;
  else if (parameter == "learning_rate") f.learning_rate = value;
  else if (parameter == "inner_iters") f.inner_iters = static_cast<int>(value);
  else if (parameter == "inflation") f.inflation = value;
  else if (parameter == "w0") f.w0 = value;
  else throw ConfigError("sweep: unknown parameter '" + parameter + "'");
}

}  // namespace

void run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep: config has no sweep axis");
  for (double v : cfg.sweep->values) {
    if (!std::isfinite(v)) throw ConfigError("sweep: values must be finite");
  }

  std::vector<std::string> long_lines;
  long_lines.push_back("value,filter,trial,metric,metric_value");
  std::vector<std::string> summary_lines;
  summary_lines.push_back("value,filter,metric,median,mean,bootstrap_low,bootstrap_high");

  int bootstrap_id = 0;
  for (double value : cfg.sweep->values) {
    ExperimentConfig point = cfg;
    point.sweep.reset();
    for (auto& f : point.filters) {
      if (parameter_applies(cfg.sweep->parameter, f.kind)) {
        set_parameter(f, cfg.sweep->parameter, value);
      }
    }
    const auto rows = run_experiment_rows(point);
    if (rows.empty()) continue;
    const auto& metric_names = rows.front().result.metric_names;
    for (const auto& row : rows) {
      for (size_t mi = 0; mi < metric_names.size(); ++mi) {
        long_lines.push_back(fmt(value) + "," + row.filter + "," + std::to_string(row.trial) +
                             "," + metric_names[mi] + "," + fmt(row.result.metrics[mi]));
      }
    }
    for (const auto& f : point.filters) {
      for (size_t mi = 0; mi < metric_names.size(); ++mi) {
        std::vector<double> values;
        for (const auto& row : rows) {
          if (row.filter == f.label && !row.result.diverged) {
            values.push_back(row.result.metrics[mi]);
          }
        }
        ++bootstrap_id;
        std::string line = fmt(value) + "," + f.label + "," + metric_names[mi];
        if (values.size() >= 2) {
          RngStream boot_rng = RngStream(cfg.seed, 0xb007u).split(bootstrap_id);
          const BootstrapCi ci = bootstrap_mean_ci(values, 500, 0.95, boot_rng);
          line += "," + fmt(median(values)) + "," + fmt(ci.mean) + "," + fmt(ci.low) + "," +
                  fmt(ci.high);
        } else if (values.size() == 1) {
          line += "," + fmt(values[0]) + "," + fmt(values[0]) + "," + fmt(values[0]) + "," +
                  fmt(values[0]);
        } else {
          line += ",nan,nan,nan,nan";
        }
        summary_lines.push_back(std::move(line));
      }
    }
  }
  ensure_out_dir(cfg.out_dir);
  write_lines(cfg.out_dir + "/sweep.csv", long_lines);
  write_lines(cfg.out_dir + "/sweep_summary.csv", summary_lines);
}

PifFilterSpec make_tracking_pif_filter(const FilterConfig& filter,
                                       const Tracking2dConfig& scenario) {
  if (!is_wolf_kind(filter.kind)) {
    throw ConfigError("pif: filter kind '" + filter.kind +
                      "' has no Gaussian PIF (only kf and wolf-* kinds do)");
  }
  return PifFilterSpec{LinearDynamics(scenario.transition(), scenario.process_cov()),
                       LinearObservation(scenario.observation(), scenario.measurement_cov()),
                       GaussianBelief(scenario.initial_state, Matrix::Identity(4, 4)),
                       weight_spec_for(filter), filter.label};
}

void run_pif_command(const ExperimentConfig& cfg) {
  Tracking2dConfig scenario = cfg.tracking;
  scenario.variant = TrackingVariant::kClean;
  scenario.steps = cfg.pif_history;
  RngStream data_rng = RngStream(cfg.seed, 0).split(0);
  const TrackingData data = tracking2d_generate(scenario, data_rng);
  std::vector<Vector> history;
  for (int t = 0; t < scenario.steps; ++t) {
    history.push_back(data.measurements.row(t).transpose());
  }

  ensure_out_dir(cfg.out_dir);
  for (const auto& f : cfg.filters) {
    const PifFilterSpec spec = make_tracking_pif_filter(f, scenario);
    const PifGrid grid = pif_grid(spec, history, cfg.pif_grid_spec, cfg.pif_reverse);
    std::vector<std::string> lines;
    lines.push_back("eps1,eps2,pif");
    for (int i = 0; i < grid.eps1.size(); ++i) {
      for (int j = 0; j < grid.eps2.size(); ++j) {
        lines.push_back(fmt(grid.eps1(i)) + "," + fmt(grid.eps2(j)) + "," +
                        fmt(grid.values(i, j)));
      }
    }
    write_lines(cfg.out_dir + "/pif_" + f.label + ".csv", lines);
  }
}

}  // namespace wolf
