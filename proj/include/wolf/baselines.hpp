#pragma once

#include "wolf/core_math.hpp"
#include "wolf/gaussian_filters.hpp"

#include <functional>
#include <utility>

namespace wolf {

/// Variational inverse-Wishart filter configuration: noise scaling ell,
/// inner iteration count, and prior measurement covariance R0.
struct KfIwConfig {
  double ell;
  int inner_iters;
  SpdMatrix r0;

  KfIwConfig(double ell_in, int inner_iters_in, Matrix r0_in);
};

/// Variational Bernoulli filter configuration: Beta prior shapes, inner
/// iteration count, and the small tolerance below which an update is skipped.
struct KfBConfig {
  double alpha0;
  double beta0;
  int inner_iters;
  double tol;

  KfBConfig(double alpha0_in, double beta0_in, int inner_iters_in, double tol_in);
};

/// One inverse-Wishart measurement update on the prior predictive belief.
/// Each inner pass recomputes
///   S    = (y - H mu)(y - H mu)^T + H Sigma H^T          (running mu, Sigma)
///   Lam  = (ell + 1)^{-1} (ell R0 + S)
///   K    = (H Sigma_pred H^T + Lam)^{-1} H Sigma_pred    (d x m gain)
///   mu   = mu_pred + K^T (y - H mu_pred)
///   Sigma = K^T Lam K + (I - K^T H) Sigma_pred (I - K^T H)^T
/// with Sigma_pred the prior predictive covariance held fixed across passes.
GaussianBelief kfiw_update(const GaussianBelief& prior, const LinearObservation& obs,
                           const Vector& y, const KfIwConfig& cfg);

/// One Bernoulli-gated measurement update on the prior predictive belief.
/// The outlier responsibility rho starts at 1 (so the first inner pass is the
/// plain Kalman update) and is refreshed from digamma log-odds each pass;
/// when rho falls below tol the state reverts to the prior predictive.
/// rho_trace, when given, receives the refreshed rho of every inner pass.
GaussianBelief kfb_update(const GaussianBelief& prior, const LinearObservation& obs,
                          const Vector& y, const KfBConfig& cfg,
                          std::vector<double>* rho_trace = nullptr);

/// Nonlinear variant: h is linearised at the running mean for the residual
/// moment B_t and at the prior predictive mean for the state update.
GaussianBelief kfb_update(const GaussianBelief& prior, const NonlinearModel& model,
                          const Vector& y, const KfBConfig& cfg,
                          std::vector<double>* rho_trace = nullptr);

/// Digamma via upward recurrence below 6 and the asymptotic series above;
/// absolute error below 1e-10 on [0.5, 100].
double digamma(double x);

/// Adam optimiser state for online gradient descent over a parameter vector.
struct AdamState {
  Vector m;
  Vector v;
  long step = 0;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int inner_iters = 1;

  static AdamState init(int dim, double learning_rate, int inner_iters);
};

using GradientFn = std::function<Vector(const Vector&)>;

/// Runs inner_iters bias-corrected Adam iterations on the per-measurement
/// loss whose gradient grad_fn supplies, re-evaluating the gradient each
/// iteration.  The step counter advances once per inner iteration.
std::pair<Vector, AdamState> adam_ogd_step(const Vector& params, const GradientFn& grad_fn,
                                           AdamState state);

}  // namespace wolf
