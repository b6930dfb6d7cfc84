#pragma once

#include "wolf/core_math.hpp"
#include "wolf/gaussian_filters.hpp"

#include <utility>
#include <vector>

namespace wolf {

/// Ensemble of state particles; rows are particles, columns state components.
struct Ensemble {
  Matrix particles;  // N x m

  explicit Ensemble(Matrix p);

  int count() const { return static_cast<int>(particles.rows()); }
  int dim() const { return static_cast<int>(particles.cols()); }

  Vector mean() const { return particles.colwise().mean(); }

  /// Sample covariance with the unbiased N-1 denominator.
  Matrix covariance() const;
};

/// Ensemble Kalman gain cov_i[theta, yhat] (var_i[yhat])^{-1}; shape m x d,
/// or m x |J| when computed over a mask of observation dimensions.
struct EnsembleGain {
  Matrix gain;
};

/// Maps every particle through f and perturbs it with an independent N(0, Q)
/// draw.  Draws are particle-major, so shared-stream comparisons across
/// filter variants line up draw for draw.
Ensemble enkf_predict(const Ensemble& ens, const NonlinearModel& model, RngStream& rng);

/// Sample-moment gain over the observation dimensions selected by mask
/// (N-1 denominators).  A singular masked prediction variance is an error;
/// callers that want to proceed must inflate or jitter deliberately.
EnsembleGain enkf_gain(const Matrix& states, const Matrix& preds, const std::vector<bool>& mask);

/// Stochastic EnKF update: per-particle prediction draws
/// yhat_i ~ N(h(theta_i), R), gain from sample moments, then
/// theta_i += K (y - yhat_i).
Ensemble enkf_update(const Ensemble& ens, const NonlinearModel& model, const Vector& y,
                     RngStream& rng);

/// Average-particle weighted EnKF: dimension j gets weight 1 when the
/// mean-over-particles squared prediction error is <= c, else 0, and the
/// update applies K Diag(w) to each residual.  With masked_gain the gain is
/// instead computed over the surviving dimensions only and zero-weight
/// dimensions are dropped from the residual.
std::pair<Ensemble, Vector> ap_enkf_update(const Ensemble& ens, const NonlinearModel& model,
                                           const Vector& y, double c, RngStream& rng,
                                           bool masked_gain = false);

/// Per-particle weighted EnKF: each particle carries its own {0,1}^d weight
/// w_ij = 1[(y_j - yhat_ij)^2 <= c].  Returns the N x d weight matrix.
std::pair<Ensemble, Matrix> pp_enkf_update(const Ensemble& ens, const NonlinearModel& model,
                                           const Vector& y, double c, RngStream& rng);

/// Huberised EnKF: residuals are clipped element-wise to [-c, c] before the
/// gain is applied.
Ensemble hub_enkf_update(const Ensemble& ens, const NonlinearModel& model, const Vector& y,
                         double c, RngStream& rng);

/// Covariance inflation about the ensemble mean:
/// theta_i <- mean + lambda (theta_i - mean), lambda >= 1.
Ensemble inflate(const Ensemble& ens, double lambda);

}  // namespace wolf
