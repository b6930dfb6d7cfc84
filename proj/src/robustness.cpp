#include "wolf/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wolf {

double pif_gaussian(const GaussianBelief& clean, const GaussianBelief& contaminated,
                    bool reverse_kl) {
  const double kl = reverse_kl ? gaussian_kl(clean, contaminated)
                               : gaussian_kl(contaminated, clean);
  return std::max(kl, 0.0);
}

PifGrid pif_grid(const PifFilterSpec& filter, const std::vector<Vector>& measurements,
                 const PifGridSpec& grid, bool reverse_kl) {
  if (measurements.size() < 2) {
    throw std::invalid_argument("pif_grid: history must contain at least two measurements");
  }
  if (filter.obs.h.rows() != 2) {
    throw std::invalid_argument("pif_grid: contamination grid requires a 2-d measurement");
  }
  if (grid.points_per_axis < 2 || !(grid.eps_max > grid.eps_min)) {
    throw std::invalid_argument("pif_grid: malformed grid specification");
  }

  // Filter the history up to the penultimate measurement, then predict once.
  GaussianBelief belief = filter.init;
  for (size_t t = 0; t + 1 < measurements.size(); ++t) {
    belief = kf_predict(belief, filter.dyn);
    belief = wolf_update(belief, filter.obs, measurements[t], filter.weight).posterior;
  }
  const GaussianBelief predictive = kf_predict(belief, filter.dyn);
  const Vector& y_final = measurements.back();
  const GaussianBelief clean =
      wolf_update(predictive, filter.obs, y_final, filter.weight).posterior;

  PifGrid out;
  out.filter_label = filter.label;
  out.history_length = static_cast<int>(measurements.size());
  out.eps1 = Vector::LinSpaced(grid.points_per_axis, grid.eps_min, grid.eps_max);
  out.eps2 = out.eps1;
  out.values.resize(grid.points_per_axis, grid.points_per_axis);
  Vector contaminated_y(2);
  for (int i = 0; i < grid.points_per_axis; ++i) {
    for (int j = 0; j < grid.points_per_axis; ++j) {
      contaminated_y << y_final(0) + out.eps1(i), y_final(1) + out.eps2(j);
      const GaussianBelief contaminated =
          wolf_update(predictive, filter.obs, contaminated_y, filter.weight).posterior;
      out.values(i, j) = pif_gaussian(clean, contaminated, reverse_kl);
    }
  }
  return out;
}

namespace detail {

// Shortest-augmenting-path assignment (Jonker-Volgenant style), O(n^3).
std::vector<int> min_cost_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n || n == 0) {
    throw std::invalid_argument("min_cost_assignment: cost matrix must be square and non-empty");
  }
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials over rows (u) and columns (v); way[j] remembers the
  // augmenting path.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[j] = row assigned to column j
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] != 0) row_to_col[static_cast<size_t>(match[j] - 1)] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

W2Result pif_ensemble_w2(const Ensemble& clean, const Ensemble& contaminated) {
  if (clean.count() != contaminated.count() || clean.dim() != contaminated.dim()) {
    throw std::invalid_argument("pif_ensemble_w2: ensemble shape mismatch");
  }
  const int n = clean.count();

  if (n > 512) {
    // Identity-permutation upper bound.
    const double sum = (clean.particles - contaminated.particles).rowwise().squaredNorm().sum();
    return W2Result{std::sqrt(sum / n), false};
  }

  Matrix cost(n, n);
  for (int i = 0; i < n; ++i) {
    cost.row(i) = (contaminated.particles.rowwise() - clean.particles.row(i))
                      .rowwise()
                      .squaredNorm()
                      .transpose();
  }
  const std::vector<int> assign = detail::min_cost_assignment(cost);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += cost(i, assign[static_cast<size_t>(i)]);
  return W2Result{std::sqrt(sum / n), true};
}

}  // namespace wolf
