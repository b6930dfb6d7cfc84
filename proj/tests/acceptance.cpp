// Acceptance suite: end-to-end checks of the toolkit's headline behaviours,
// one per criterion, each printing a single PASS/FAIL line.  Run with no
// arguments for the full suite or with criterion numbers to select a subset.

#include "support/oracles.hpp"
#include "wolf/baselines.hpp"
#include "wolf/ensemble_filters.hpp"
#include "wolf/gaussian_filters.hpp"
#include "wolf/harness.hpp"
#include "wolf/robustness.hpp"
#include "wolf/scenarios.hpp"
#include "wolf/weights.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace wolf;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

FilterConfig make_filter(const std::string& kind, double c = 1.0) {
  FilterConfig f;
  f.kind = kind;
  f.label = kind;
  f.c = c;
  return f;
}

// The five tracking filters with the scenario-level configurations chosen by
// the Student-variant grid sweep (one recorded config per filter).
std::vector<FilterConfig> tracking_filters() {
  std::vector<FilterConfig> filters;
  filters.push_back(make_filter("kf"));
  filters.push_back(make_filter("wolf-imq", 8.0));
  filters.push_back(make_filter("wolf-tmd", 12.0));
  FilterConfig iw = make_filter("kf-iw");
  iw.ell = 5.0;
  iw.inner_iters = 2;
  filters.push_back(iw);
  FilterConfig b = make_filter("kf-b");
  b.alpha0 = 8.0;
  b.beta0 = 1.0;
  b.inner_iters = 2;
  b.tol = 1e-6;
  filters.push_back(b);
  return filters;
}

ExperimentConfig tracking_config(TrackingVariant variant, int trials, bool timing) {
  ExperimentConfig cfg;
  cfg.scenario = "track2d";
  cfg.tracking.variant = variant;
  cfg.tracking.steps = 1000;
  cfg.trials = trials;
  cfg.seed = 42;
  cfg.jobs = timing ? 1 : 2;  // timing runs stay off the second core
  cfg.timing_enabled = timing;
  cfg.filters = tracking_filters();
  cfg.reference = "kf";
  return cfg;
}

std::map<std::string, std::vector<double>> metric_by_filter(const std::vector<ExperimentRow>& rows,
                                                            int metric_index) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& row : rows) {
    if (!row.result.diverged) {
      out[row.filter].push_back(row.result.metrics[static_cast<size_t>(metric_index)]);
    }
  }
  return out;
}

std::map<std::string, double> median_step_ns(const std::vector<ExperimentRow>& rows) {
  std::map<std::string, std::vector<double>> ns;
  for (const auto& row : rows) {
    ns[row.filter].push_back(static_cast<double>(row.result.median_step_ns));
  }
  std::map<std::string, double> out;
  for (auto& [label, values] : ns) out[label] = median(values);
  return out;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

Check criterion_conjugacy() {
  Check check;
  RngStream rng(1001, 0);
  double worst_oracle = 0.0, worst_wolf = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 1 + static_cast<int>(rng.next_uniform() * 5);
    const int d = 1 + static_cast<int>(rng.next_uniform() * 5);
    const GaussianBelief prior(test::random_vector(m, rng), test::random_spd(m, rng));
    const LinearObservation obs(test::random_matrix(d, m, rng), test::random_spd(d, rng));
    const Vector y = test::random_vector(d, rng);

    const auto kf = kf_update(prior, obs, y);
    const auto oracle = test::conjugate_update_oracle(prior, obs.h, obs.r.matrix(), y);
    worst_oracle = std::max({worst_oracle, (kf.posterior.mean - oracle.mean).norm(),
                             (kf.posterior.cov.matrix() - oracle.cov.matrix()).norm()});

    const auto wolf = wolf_update(prior, obs, y, WeightSpec::constant(1.0));
    worst_wolf = std::max({worst_wolf, (kf.posterior.mean - wolf.posterior.mean).norm(),
                           (kf.posterior.cov.matrix() - wolf.posterior.cov.matrix()).norm()});
  }
  check.require(worst_oracle < 1e-8, "kf_update vs conjugate oracle exceeded 1e-8");
  check.require(worst_wolf < 1e-10, "wolf_update(const 1) vs kf_update exceeded 1e-10");
  std::ostringstream os;
  os << "max |kf - oracle| " << worst_oracle << ", max |wolf(1) - kf| " << worst_wolf;
  check.note(os.str());
  return check;
}

Check criterion_weighted_equivalence() {
  Check check;
  RngStream rng(1002, 0);
  double worst = 0.0;
  for (double w : {0.1, 0.5, 0.9}) {
    for (int rep = 0; rep < 50; ++rep) {
      const int m = 1 + static_cast<int>(rng.next_uniform() * 5);
      const int d = 1 + static_cast<int>(rng.next_uniform() * 5);
      const GaussianBelief prior(test::random_vector(m, rng), test::random_spd(m, rng));
      const LinearObservation obs(test::random_matrix(d, m, rng), test::random_spd(d, rng));
      const Vector y = test::random_vector(d, rng);
      const auto wolf = wolf_update(prior, obs, y, WeightSpec::constant(w));
      const LinearObservation scaled(obs.h, Matrix(obs.r.matrix() / (w * w)));
      const auto kf = kf_update(prior, scaled, y);
      worst = std::max({worst, (wolf.posterior.mean - kf.posterior.mean).norm(),
                        (wolf.posterior.cov.matrix() - kf.posterior.cov.matrix()).norm()});
    }
  }
  check.require(worst < 1e-10, "wolf(const w) vs kf with R/w^2 exceeded 1e-10");
  std::ostringstream os;
  os << "max deviation " << worst;
  check.note(os.str());
  return check;
}

Check criterion_map_identity() {
  Check check;
  RngStream rng(1003, 0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_uniform() * 4);
    const SpdMatrix r(test::random_spd(d, rng));
    const Vector y = 4.0 * test::random_vector(d, rng);
    const Vector yhat = test::random_vector(d, rng);
    const double c = std::sqrt(static_cast<double>(d)) + 4.0 * rng.next_uniform();
    const double w = compute_weight(WeightSpec::md(c), y, yhat, r);
    const double map = map_weight_oracle(c, d, mahalanobis_sq(y - yhat, r));
    worst = std::max(worst, std::abs(map - w * w));
  }
  check.require(worst < 1e-12, "MAP estimate vs squared MD weight exceeded 1e-12");
  std::ostringstream os;
  os << "max |MAP - W_MD^2| " << worst;
  check.note(os.str());
  return check;
}

Check criterion_pif_dichotomy() {
  Check check;
  Tracking2dConfig scenario;
  scenario.variant = TrackingVariant::kClean;
  scenario.steps = 20;
  RngStream rng(0, 0);
  const TrackingData data = tracking2d_generate(scenario, rng);
  std::vector<Vector> history;
  for (int t = 0; t < scenario.steps; ++t) {
    history.push_back(data.measurements.row(t).transpose());
  }
  const auto filter_for = [&](const WeightSpec& w, const char* label) {
    return PifFilterSpec{LinearDynamics(scenario.transition(), scenario.process_cov()),
                         LinearObservation(scenario.observation(), scenario.measurement_cov()),
                         GaussianBelief(scenario.initial_state, Matrix::Identity(4, 4)), w,
                         label};
  };

  std::vector<double> kf_maxima;
  for (double limit : {5.0, 10.0, 20.0}) {
    PifGridSpec grid;
    grid.eps_min = -limit;
    grid.eps_max = limit;
    grid.points_per_axis = 41;
    kf_maxima.push_back(
        pif_grid(filter_for(WeightSpec::constant(1.0), "kf"), history, grid).max_value());
  }
  const double growth1 = kf_maxima[1] / kf_maxima[0];
  const double growth2 = kf_maxima[2] / kf_maxima[1];
  check.require(std::abs(growth1 - 4.0) <= 0.4, "KF max growth 5->10 not within 10% of 4x");
  check.require(std::abs(growth2 - 4.0) <= 0.4, "KF max growth 10->20 not within 10% of 4x");

  PifGridSpec wide;
  wide.eps_min = -20.0;
  wide.eps_max = 20.0;
  wide.points_per_axis = 41;
  const double imq_max =
      pif_grid(filter_for(WeightSpec::imq(3.0), "wolf-imq"), history, wide).max_value();
  const double tmd_max =
      pif_grid(filter_for(WeightSpec::tmd(2.0), "wolf-tmd"), history, wide).max_value();
  check.require(imq_max < kf_maxima[0], "WoLF-IMQ wide-grid max not below KF [-5,5]^2 max");
  check.require(tmd_max < kf_maxima[0], "WoLF-TMD wide-grid max not below KF [-5,5]^2 max");

  std::ostringstream os;
  os << "KF max(L=5) " << kf_maxima[0] << ", growth " << growth1 << "/" << growth2
     << ", IMQ max " << imq_max << ", TMD max " << tmd_max;
  check.note(os.str());
  return check;
}

Check criterion_student_tracking() {
  Check check;
  const ExperimentConfig cfg = tracking_config(TrackingVariant::kStudent, 100, false);
  const auto rows = run_experiment_rows(cfg);
  auto j0 = metric_by_filter(rows, 0);
  const double kf = median(j0["kf"]);
  const double imq = median(j0["wolf-imq"]);
  const double tmd = median(j0["wolf-tmd"]);
  check.require(imq < kf, "WoLF-IMQ median J0 not below KF");
  check.require(tmd < kf, "WoLF-TMD median J0 not below KF");
  std::ostringstream os;
  os << "median J0: kf " << kf << ", wolf-imq " << imq << ", wolf-tmd " << tmd << ", kf-iw "
     << median(j0["kf-iw"]) << ", kf-b " << median(j0["kf-b"]);
  check.note(os.str());
  return check;
}

Check criterion_mixture_tracking() {
  Check check;
  const ExperimentConfig cfg = tracking_config(TrackingVariant::kMixture, 100, false);
  const auto rows = run_experiment_rows(cfg);
  auto j0 = metric_by_filter(rows, 0);
  const double kf = median(j0["kf"]);
  const double imq = median(j0["wolf-imq"]);
  const double iw = median(j0["kf-iw"]);
  check.require(imq < kf, "WoLF-IMQ median J0 not below KF");
  check.require(imq < iw, "WoLF-IMQ median J0 not below KF-IW");
  std::ostringstream os;
  os << "median J0: kf " << kf << ", wolf-imq " << imq << ", kf-iw " << iw;
  check.note(os.str());
  return check;
}

Check criterion_timing() {
  Check check;
  const ExperimentConfig cfg = tracking_config(TrackingVariant::kStudent, 50, true);
  const auto rows = run_experiment_rows(cfg);
  const auto step_ns = median_step_ns(rows);
  const double kf = step_ns.at("kf");
  const double imq_ratio = step_ns.at("wolf-imq") / kf;
  const double iw_ratio = step_ns.at("kf-iw") / kf;
  const double b_ratio = step_ns.at("kf-b") / kf;
  check.require(imq_ratio <= 1.3, "WoLF-IMQ per-step time above 1.3x KF");
  check.require(iw_ratio >= 1.5, "KF-IW (I=2) per-step time below 1.5x KF");
  check.require(b_ratio >= 1.5, "KF-B (I=2) per-step time below 1.5x KF");
  std::ostringstream os;
  os << "per-step ratios vs kf: wolf-imq " << imq_ratio << ", kf-iw " << iw_ratio << ", kf-b "
     << b_ratio;
  check.note(os.str());
  return check;
}

Check criterion_enkf_consistency() {
  Check check;
  Matrix f = Matrix::Identity(4, 4);
  f(0, 2) = 0.1;
  f(1, 3) = 0.1;
  Matrix h = Matrix::Zero(2, 4);
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const Matrix q = 0.1 * Matrix::Identity(4, 4);
  const Matrix r = 0.5 * Matrix::Identity(2, 2);
  const LinearDynamics dyn(f, q);
  const LinearObservation obs(h, r);
  const NonlinearModel model([f](const Vector& x) { return Vector(f * x); },
                             [h](const Vector& x) { return Vector(h * x); }, q, r);

  Matrix abs_diffs(10, 4);
  for (int seed = 0; seed < 10; ++seed) {
    RngStream rng(5000 + seed, 0);
    Vector truth = test::random_vector(4, rng);
    std::vector<Vector> measurements;
    for (int t = 0; t < 20; ++t) {
      truth = f * truth + sample_mvn(GaussianBelief(Vector::Zero(4), q), rng);
      measurements.push_back(h * truth + sample_mvn(GaussianBelief(Vector::Zero(2), r), rng));
    }
    GaussianBelief belief(Vector::Zero(4), Matrix::Identity(4, 4));
    RngStream ens_rng(5000 + seed, 1);
    Matrix particles(100000, 4);
    const GaussianBelief init(Vector::Zero(4), Matrix::Identity(4, 4));
    for (int i = 0; i < particles.rows(); ++i) {
      particles.row(i) = sample_mvn(init, ens_rng).transpose();
    }
    Ensemble ens(std::move(particles));
    for (const auto& y : measurements) {
      belief = kf_update(kf_predict(belief, dyn), obs, y).posterior;
      ens = enkf_update(enkf_predict(ens, model, ens_rng), model, y, ens_rng);
    }
    abs_diffs.row(seed) = (ens.mean() - belief.mean).cwiseAbs().transpose();
  }
  double worst_median = 0.0;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> column(abs_diffs.col(i).data(), abs_diffs.col(i).data() + 10);
    worst_median = std::max(worst_median, median(column));
  }
  check.require(worst_median < 0.05, "median per-component |EnKF mean - KF mean| above 0.05");
  std::ostringstream os;
  os << "worst per-component median deviation " << worst_median;
  check.note(os.str());
  return check;
}

// Shared Lorenz sweep for criteria 9 and 10.
struct LorenzSweepResult {
  // filter label -> c value -> median-over-seeds metric
  std::map<std::string, std::map<double, double>> lt_mean;
  std::map<std::string, std::map<double, double>> lt_final;
};

const std::vector<double> kLorenzGrid = {1.5, 4.74, 15.0, 47.4, 150.0, 474.0, 1500.0};

LorenzSweepResult lorenz_sweep() {
  ExperimentConfig cfg;
  cfg.scenario = "lorenz96";
  cfg.lorenz.dim = 40;
  cfg.lorenz.steps = 60;
  cfg.lorenz.p_eps = 0.01;
  cfg.particles = 500;
  cfg.trials = 5;
  cfg.seed = 42;
  cfg.jobs = 2;
  cfg.timing_enabled = false;
  cfg.filters = {make_filter("enkf"), make_filter("ap-enkf"), make_filter("pp-enkf"),
                 make_filter("hub-enkf")};
  cfg.reference = "enkf";

  LorenzSweepResult result;
  for (double c : kLorenzGrid) {
    ExperimentConfig point = cfg;
    for (auto& f : point.filters) f.c = c;
    const auto rows = run_experiment_rows(point);
    auto lt_mean = metric_by_filter(rows, 0);
    auto lt_final = metric_by_filter(rows, 1);
    for (auto& [label, values] : lt_mean) result.lt_mean[label][c] = median(values);
    for (auto& [label, values] : lt_final) result.lt_final[label][c] = median(values);
  }
  return result;
}

double best_value(const std::map<double, double>& by_c) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [c, v] : by_c) best = std::min(best, v);
  return best;
}

double worst_value(const std::map<double, double>& by_c) {
  double worst = 0.0;
  for (const auto& [c, v] : by_c) worst = std::max(worst, v);
  return worst;
}

Check criterion_lorenz_accuracy(const LorenzSweepResult& sweep) {
  Check check;
  const double enkf = sweep.lt_mean.at("enkf").begin()->second;  // c-independent
  const double ap = best_value(sweep.lt_mean.at("ap-enkf"));
  const double pp = best_value(sweep.lt_mean.at("pp-enkf"));
  const double hub = best_value(sweep.lt_mean.at("hub-enkf"));
  check.require(ap < enkf, "AP-EnKF tuned lt_mean not below EnKF");
  check.require(pp < enkf, "PP-EnKF tuned lt_mean not below EnKF");
  check.require(std::abs(hub / ap - 1.0) <= 0.10, "Hub-EnKF best-c not within 10% of AP-EnKF");
  std::ostringstream os;
  os << "median lt_mean: enkf " << enkf << ", ap " << ap << ", pp " << pp << ", hub " << hub;
  check.note(os.str());
  return check;
}

Check criterion_lorenz_sweep_robustness(const LorenzSweepResult& sweep) {
  Check check;
  const auto& ap = sweep.lt_final.at("ap-enkf");
  const auto& hub = sweep.lt_final.at("hub-enkf");
  const double ap_degradation = worst_value(ap) / best_value(ap);
  const double hub_degradation = worst_value(hub) / best_value(hub);
  check.require(ap_degradation < hub_degradation,
                "AP-EnKF max degradation over the c-grid not below Hub-EnKF's");
  std::ostringstream os;
  os << "L_T degradation over c in [1.5, 1500]: ap " << ap_degradation << "x, hub "
     << hub_degradation << "x";
  check.note(os.str());
  return check;
}

Check criterion_online_regression() {
  Check check;
  for (bool sorted : {false, true}) {
    ExperimentConfig cfg;
    cfg.scenario = "regress1d";
    cfg.regression_steps = 1500;
    cfg.regression_p_eps = 0.05;
    cfg.regression_r = 0.3;
    cfg.regression_sorted = sorted;
    cfg.trials = 20;
    cfg.seed = 55;
    cfg.jobs = 2;
    cfg.timing_enabled = false;
    cfg.filters = {make_filter("ekf"), make_filter("wolf-imq", 6.0)};
    cfg.reference = "ekf";
    const auto rows = run_experiment_rows(cfg);

    std::map<int, double> ekf, imq;
    for (const auto& row : rows) {
      if (row.result.diverged) continue;
      (row.filter == "ekf" ? ekf : imq)[row.trial] = row.result.metrics[0];
    }
    int wins = 0;
    for (const auto& [trial, value] : ekf) {
      if (imq.count(trial) && imq[trial] < value) ++wins;
    }
    check.require(wins >= 16, std::string(sorted ? "sorted" : "unsorted") +
                                  " stream win rate below 80% (" + std::to_string(wins) + "/20)");
    std::ostringstream os;
    os << (sorted ? "sorted" : "unsorted") << " wins " << wins << "/20";
    check.note(os.str());
  }
  return check;
}

Check criterion_numerical_suite() {
  Check check;

  // MLP gradient vs central finite differences.
  {
    const MlpSpec spec = MlpSpec::regression_1d();
    const int m = spec.param_count();
    RngStream rng(1012, 0);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const Vector params = mlp_init(spec, rng) + 0.1 * test::random_vector(m, rng);
      const Vector x = Vector::Constant(1, -3.0 + 6.0 * rng.next_uniform());
      const Vector grad = mlp_jacobian(spec, params, x);
      Vector p = params;
      double max_rel = 0.0;
      for (int i = 0; i < m; ++i) {
        const double step = 1e-5;
        p(i) = params(i) + step;
        const double up = mlp_apply(spec, p, x);
        p(i) = params(i) - step;
        const double down = mlp_apply(spec, p, x);
        p(i) = params(i);
        const double fd = (up - down) / (2.0 * step);
        max_rel = std::max(max_rel, std::abs(grad(i) - fd) / std::max(1.0, std::abs(fd)));
      }
      worst = std::max(worst, max_rel);
    }
    check.require(worst < 1e-5, "mlp_jacobian vs finite differences exceeded 1e-5 relative");
  }

  // RK4 order-five local error.
  {
    const VectorFn drift = [](const Vector& v) { return Vector(-v); };
    const auto err = [&](double dt) {
      return std::abs(rk4_step(drift, Vector::Ones(1), dt)(0) - std::exp(-dt));
    };
    const double ratio = err(0.1) / err(0.05);
    check.require(std::abs(ratio - 32.0) < 6.0, "RK4 halving ratio not ~32x");
  }

  // Gaussian KL vs Monte-Carlo within three standard errors.
  {
    RngStream rng(1013, 0);
    for (int rep = 0; rep < 3; ++rep) {
      const int m = 2 + static_cast<int>(rng.next_uniform() * 3);
      const GaussianBelief p(test::random_vector(m, rng), test::random_spd(m, rng));
      const GaussianBelief q(test::random_vector(m, rng), test::random_spd(m, rng));
      RngStream draw = rng.split(50 + rep);
      const auto mc = test::mc_kl(p, q, 100000, draw);
      check.require(std::abs(mc.estimate - gaussian_kl(p, q)) < 3.0 * mc.std_error + 1e-12,
                    "gaussian_kl outside 3 sigma of the Monte-Carlo estimate");
    }
  }

  // Lorenz96 all-8 fixed point, exactly.
  {
    Lorenz96Config cfg;
    cfg.dim = 16;
    cfg.steps = 50;
    cfg.forcing_sd = 0.0;
    cfg.init_sd = 0.0;
    cfg.burn_in = 0;
    RngStream rng(1014, 0);
    const Lorenz96Data data = lorenz96_generate(cfg, rng);
    check.require((data.states.array() == 8.0).all(), "all-8 Lorenz96 fixed point drifted");
  }

  check.note("gradients, RK4 order, KL vs MC, fixed point");
  return check;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* title;
    std::function<Check()> run;
  };

  // The Lorenz sweep feeds two criteria; run it lazily and cache.
  static std::optional<LorenzSweepResult> lorenz_cache;
  const auto lorenz = [&]() -> const LorenzSweepResult& {
    if (!lorenz_cache) lorenz_cache = lorenz_sweep();
    return *lorenz_cache;
  };

  const std::vector<Criterion> criteria = {
      {1, "conjugacy oracle (kf_update, wolf_update const-1)", criterion_conjugacy},
      {2, "weighted update equals kf with R/w^2", criterion_weighted_equivalence},
      {3, "MAP weight identity", criterion_map_identity},
      {4, "PIF dichotomy (quadratic KF, bounded WoLF)", criterion_pif_dichotomy},
      {5, "2d tracking, Student contamination", criterion_student_tracking},
      {6, "2d tracking, mixture contamination", criterion_mixture_tracking},
      {7, "per-step timing ratios", criterion_timing},
      {8, "EnKF consistency with the KF", criterion_enkf_consistency},
      {9, "Lorenz96 weighted-ensemble accuracy", [&] { return criterion_lorenz_accuracy(lorenz()); }},
      {10, "Lorenz96 threshold-sweep robustness",
       [&] { return criterion_lorenz_sweep_robustness(lorenz()); }},
      {11, "online 1d regression win rate", criterion_online_regression},
      {12, "numerical analysis suite", criterion_numerical_suite},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), criterion.id) == selected.end()) {
      continue;
    }
    Check result;
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s  criterion %02d: %s%s%s\n", result.ok ? "PASS" : "FAIL", criterion.id,
                criterion.title, result.detail.empty() ? "" : " -- ", result.detail.c_str());
    std::fflush(stdout);
    failures += result.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
