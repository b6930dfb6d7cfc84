#pragma once

#include "wolf/core_math.hpp"
#include "wolf/ensemble_filters.hpp"
#include "wolf/gaussian_filters.hpp"
#include "wolf/weights.hpp"

#include <string>
#include <vector>

namespace wolf {

/// Posterior influence function between the posteriors computed with the
/// clean and a contaminated final measurement: KL(contaminated || clean).
/// Set reverse_kl to explore the opposite orientation.  Clamped at zero so
/// numerically identical posteriors report exactly no influence.
double pif_gaussian(const GaussianBelief& clean, const GaussianBelief& contaminated,
                    bool reverse_kl = false);

/// Rectangular contamination grid specification for one PIF sweep;
/// defaults follow the 41 x 41 lattice over [-5, 5]^2.
struct PifGridSpec {
  double eps_min = -5.0;
  double eps_max = 5.0;
  int points_per_axis = 41;
};

/// PIF values over a 2-d contamination grid; values(i, j) corresponds to the
/// contamination (eps1(i), eps2(j)) added to the final measurement.
struct PifGrid {
  Vector eps1;
  Vector eps2;
  Matrix values;
  std::string filter_label;
  int history_length = 0;

  double max_value() const { return values.maxCoeff(); }
};

/// Linear filter whose influence is analysed: a Kalman-family filter with a
/// weighting function (Constant(1) is the plain KF) run from init over a
/// measurement history.
struct PifFilterSpec {
  LinearDynamics dyn;
  LinearObservation obs;
  GaussianBelief init;
  WeightSpec weight;
  std::string label;
};

/// Runs the filter over measurements[0..T-2] once, then for every grid point
/// epsilon computes the final update with y_T and with y_T + epsilon and
/// records the PIF.  Requires at least two measurements (d = 2).
PifGrid pif_grid(const PifFilterSpec& filter, const std::vector<Vector>& measurements,
                 const PifGridSpec& grid, bool reverse_kl = false);

/// 2-Wasserstein distance between two equal-size ensembles.
struct W2Result {
  double value = 0.0;
  /// True when the optimal assignment was computed exactly; false when the
  /// value is the identity-permutation upper bound (N > 512).
  bool exact = true;
};

/// Exact optimal-assignment W2 for N <= 512 particles (Hungarian method on
/// the squared-distance matrix); the identity-permutation upper bound above.
W2Result pif_ensemble_w2(const Ensemble& clean, const Ensemble& contaminated);

namespace detail {
/// Minimum-cost perfect assignment of an n x n cost matrix; returns the
/// column assigned to each row.
std::vector<int> min_cost_assignment(const Matrix& cost);
}  // namespace detail

}  // namespace wolf
