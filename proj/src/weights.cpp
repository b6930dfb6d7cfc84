#include "wolf/weights.hpp"

#include <cmath>

namespace wolf {
namespace {

void require_positive_c(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("WeightSpec: threshold c must be positive and finite");
  }
}

}  // namespace

WeightSpec WeightSpec::constant(double w0) {
  if (!(w0 >= 0.0 && w0 <= 1.0)) {
    throw std::invalid_argument("WeightSpec: constant weight must lie in [0, 1]");
  }
  return WeightSpec{WeightKind::kConstant, 1.0, w0};
}

WeightSpec WeightSpec::imq(double c) {
  require_positive_c(c);
  return WeightSpec{WeightKind::kImq, c, 1.0};
}

WeightSpec WeightSpec::md(double c) {
  require_positive_c(c);
  return WeightSpec{WeightKind::kMd, c, 1.0};
}

WeightSpec WeightSpec::tmd(double c) {
  require_positive_c(c);
  return WeightSpec{WeightKind::kTmd, c, 1.0};
}

WeightSpec WeightSpec::per_dim_tmd(double c) {
  require_positive_c(c);
  return WeightSpec{WeightKind::kPerDimTmd, c, 1.0};
}

double compute_weight(const WeightSpec& spec, const Vector& y, const Vector& yhat,
                      const SpdMatrix& r) {
  if (y.size() != yhat.size() || y.size() != r.dim()) {
    throw std::invalid_argument("compute_weight: dimension mismatch");
  }
  if (spec.kind == WeightKind::kPerDimTmd) {
    throw std::invalid_argument("compute_weight: PerDimTMD requires compute_weight_vector");
  }
  if (spec.kind == WeightKind::kConstant) return spec.w0;
  if (!y.allFinite()) return 0.0;

  switch (spec.kind) {
    case WeightKind::kImq: {
      const double sq = (y - yhat).squaredNorm();
      return 1.0 / std::sqrt(1.0 + sq / (spec.c * spec.c));
    }
    case WeightKind::kMd: {
      const double sq = mahalanobis_sq(y - yhat, r);
      return 1.0 / std::sqrt(1.0 + sq / (spec.c * spec.c));
    }
    case WeightKind::kTmd: {
      const double sq = mahalanobis_sq(y - yhat, r);
      return sq <= spec.c ? 1.0 : 0.0;
    }
    default:
      throw std::logic_error("compute_weight: unreachable");
  }
}

Vector compute_weight_vector(const WeightSpec& spec, const Vector& y, const Vector& yhat,
                             const Vector& r_diag) {
  if (spec.kind != WeightKind::kPerDimTmd) {
    throw std::invalid_argument("compute_weight_vector: spec must be PerDimTMD");
  }
  if (y.size() != yhat.size() || y.size() != r_diag.size()) {
    throw std::invalid_argument("compute_weight_vector: dimension mismatch");
  }
  if ((r_diag.array() <= 0.0).any()) {
    throw std::invalid_argument("compute_weight_vector: r_diag entries must be positive");
  }
  Vector w(y.size());
  for (int j = 0; j < y.size(); ++j) {
    if (!std::isfinite(y(j))) {
      w(j) = 0.0;
      continue;
    }
    const double e = y(j) - yhat(j);
    w(j) = (e * e / r_diag(j) <= spec.c) ? 1.0 : 0.0;
  }
  return w;
}

double map_weight_oracle(double c, int n_y, double maha_sq) {
  if (n_y <= 0) throw std::invalid_argument("map_weight_oracle: n_y must be positive");
  if (maha_sq < 0.0) throw std::invalid_argument("map_weight_oracle: maha_sq must be nonnegative");
  const double alpha = 0.5 * (c * c - n_y + 2.0);
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("map_weight_oracle: c too small relative to n_y (alpha <= 0)");
  }
  const double beta = 0.5 * c * c;
  return (alpha + 0.5 * n_y - 1.0) / (beta + 0.5 * maha_sq);
}

}  // namespace wolf
