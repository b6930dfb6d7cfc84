#pragma once

#include "wolf/core_math.hpp"
#include "wolf/weights.hpp"

#include <functional>
#include <optional>

namespace wolf {

/// Linear-Gaussian dynamics theta_t = F theta_{t-1} + N(0, Q).
///
/// Q may be passed exactly singular (e.g. zero); a 1e-12 * I jitter is then
/// added so the stored covariance stays factorisable, and q_jittered records
/// that this happened.
struct LinearDynamics {
  Matrix f;
  bool q_jittered = false;  // initialised before q: its maker writes the flag
  SpdMatrix q;

  LinearDynamics(Matrix f_in, Matrix q_in);
};

/// Linear-Gaussian observation y_t = H theta_t + N(0, R).
struct LinearObservation {
  Matrix h;
  SpdMatrix r;

  LinearObservation(Matrix h_in, Matrix r_in);
};

using VectorFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/// Nonlinear state-space model with dynamics f, observation h and Gaussian
/// noise covariances Q, R.  Analytic Jacobians are optional; when absent the
/// filters fall back to central finite differences.  In debug builds a
/// supplied Jacobian is checked against finite differences at construction.
struct NonlinearModel {
  VectorFn f;
  VectorFn h;
  SpdMatrix q;
  SpdMatrix r;
  std::optional<JacobianFn> f_jacobian;
  std::optional<JacobianFn> h_jacobian;

  NonlinearModel(VectorFn f_in, VectorFn h_in, Matrix q_in, Matrix r_in,
                 std::optional<JacobianFn> f_jac = std::nullopt,
                 std::optional<JacobianFn> h_jac = std::nullopt,
                 const Vector& debug_probe_state = Vector());

  int state_dim() const { return q.dim(); }
  int obs_dim() const { return r.dim(); }
};

/// Result of one measurement update.
struct UpdateOutcome {
  GaussianBelief posterior;
  Vector weight;      // size 1 for scalar-weight updates, size d for dimension-wise
  Vector innovation;  // y - yhat
  double gain_norm;   // Frobenius norm of the gain, diagnostic only
};

/// Prior predictive: mean = F mu, cov = F Sigma F^T + Q (re-symmetrised).
GaussianBelief kf_predict(const GaussianBelief& prior, const LinearDynamics& dyn);

/// Standard Kalman update in precision form:
///   Sigma_t^{-1} = Sigma_{t|t-1}^{-1} + H^T R^{-1} H
///   K = Sigma_t H^T R^{-1},  mu_t = mu_{t|t-1} + K (y - H mu_{t|t-1}).
UpdateOutcome kf_update(const GaussianBelief& prior, const LinearObservation& obs,
                        const Vector& y);

/// Weighted-likelihood update: the Kalman update with R^{-1} scaled by
/// w^2 = W^2(y, yhat):
///   Sigma_t^{-1} = Sigma_{t|t-1}^{-1} + w^2 H^T R^{-1} H
///   K = w^2 Sigma_t H^T R^{-1},  mu_t = mu_{t|t-1} + K (y - yhat).
/// w = 0 returns the prior unchanged.
UpdateOutcome wolf_update(const GaussianBelief& prior, const LinearObservation& obs,
                          const Vector& y, const WeightSpec& spec);

/// Dimension-weighted update with precision Rbar^{-1} = Diag(w) R^{-1} Diag(w);
/// zero-weight dimensions contribute nothing.
UpdateOutcome wolf_update_dimwise(const GaussianBelief& prior, const LinearObservation& obs,
                                  const Vector& y, const Vector& w);

/// Jacobian by central finite differences with per-coordinate step
/// 1e-6 * max(1, |x_i|); row i is the gradient of output component i.
Matrix numerical_jacobian(const VectorFn& fn, const Vector& x);

/// Analytic Jacobian when the model supplies one, finite differences otherwise.
Matrix jacobian(const VectorFn& fn, const std::optional<JacobianFn>& analytic, const Vector& x);

/// EKF predict: mean = f(mu), cov = F Sigma F^T + Q with F the Jacobian of f at mu.
GaussianBelief ekf_predict(const GaussianBelief& prior, const NonlinearModel& model);

/// EKF update with weighting: yhat = h(mu), H = Jacobian of h at mu, then the
/// wolf_update algebra.  Constant(1) gives the standard EKF.  PerDimTMD specs
/// route through the dimension-wise update (R must be diagonal).
UpdateOutcome ekf_update(const GaussianBelief& prior, const NonlinearModel& model,
                         const Vector& y, const WeightSpec& spec);

}  // namespace wolf
