#pragma once

#include "wolf/core_math.hpp"

namespace wolf {

enum class WeightKind { kConstant, kImq, kMd, kTmd, kPerDimTmd };

/// Declarative choice of observation weighting function.
///
/// c is the soft threshold of the IMQ/MD forms and the hard threshold of the
/// TMD forms; w0 is the fixed weight of the constant form.  The TMD forms
/// compare the *squared* Mahalanobis distance against c (not c^2), exactly
/// matching their defining equations.
struct WeightSpec {
  WeightKind kind = WeightKind::kConstant;
  double c = 1.0;
  double w0 = 1.0;

  static WeightSpec constant(double w0);
  static WeightSpec imq(double c);
  static WeightSpec md(double c);
  static WeightSpec tmd(double c);
  static WeightSpec per_dim_tmd(double c);
};

/// Scalar weight W(y, yhat) in [0, 1].
///
///   Constant: w0
///   IMQ:      (1 + ||y - yhat||^2 / c^2)^{-1/2}
///   MD:       (1 + (y-yhat)^T R^{-1} (y-yhat) / c^2)^{-1/2}
///   TMD:      1 if (y-yhat)^T R^{-1} (y-yhat) <= c, else 0
///
/// Non-finite entries in y give weight 0: an unparseable measurement is
/// treated as a maximal outlier.
double compute_weight(const WeightSpec& spec, const Vector& y, const Vector& yhat,
                      const SpdMatrix& r);

/// Per-dimension thresholded weight for diagonal observation covariance:
/// entry j is 1 if (y_j - yhat_j)^2 / r_diag_j <= c, else 0.
Vector compute_weight_vector(const WeightSpec& spec, const Vector& y, const Vector& yhat,
                             const Vector& r_diag);

/// Mode of the Gamma posterior over the per-observation precision weight,
/// with shape/rate hyperparameters alpha = (c^2 - n_y + 2)/2, beta = c^2/2:
///   (alpha + n_y/2 - 1) / (beta + maha_sq/2)  =  c^2 / (c^2 + maha_sq).
/// Equals the squared MD weight; used as an independent cross-check.
double map_weight_oracle(double c, int n_y, double maha_sq);

}  // namespace wolf
