#include "wolf/core_math.hpp"

#include <cmath>
#include <limits>

namespace wolf {
namespace {

// splitmix64; used both to seed streams and as the raw generator step.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return splitmix64(s);
}

}  // namespace

SpdMatrix::SpdMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) {
    throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
  }
  double scale = 0.0;
  double asym = 0.0;
  for (int j = 0; j < m_.cols(); ++j) {
    for (int i = 0; i <= j; ++i) {
      const double a = m_(i, j);
      if (!std::isfinite(a) || !std::isfinite(m_(j, i))) {
        throw std::invalid_argument("SpdMatrix: non-finite entries");
      }
      scale = std::max(scale, std::abs(a));
      asym = std::max(asym, std::abs(a - m_(j, i)));
    }
  }
  if (asym > 1e-12 * std::max(scale, 1.0)) {
    throw std::invalid_argument("SpdMatrix: matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(m_);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("SpdMatrix: Cholesky factorisation failed (not positive definite)");
  }
  chol_l_ = llt.matrixL();
  const double min_diag = chol_l_.diagonal().minCoeff();
  const double max_diag = chol_l_.diagonal().maxCoeff();
  if (min_diag < 1e-12 * max_diag) {
    throw std::runtime_error("SpdMatrix: matrix is numerically singular");
  }
}

Vector SpdMatrix::solve(const Vector& b) const {
  Vector y = chol_l_.triangularView<Eigen::Lower>().solve(b);
  return chol_l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdMatrix::solve(const Matrix& b) const {
  Matrix y = chol_l_.triangularView<Eigen::Lower>().solve(b);
  return chol_l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdMatrix::inverse() const {
  const Matrix eye = Matrix::Identity(dim(), dim());
  return symmetrize(solve(eye));
}

double SpdMatrix::log_det() const {
  return 2.0 * chol_l_.diagonal().array().log().sum();
}

GaussianBelief::GaussianBelief(Vector mean_in, Matrix cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
  if (mean.size() != cov.dim()) {
    throw std::invalid_argument("GaussianBelief: mean/cov dimension mismatch");
  }
  if (!mean.allFinite()) {
    throw std::invalid_argument("GaussianBelief: non-finite mean");
  }
}

GaussianBelief::GaussianBelief(Vector mean_in, SpdMatrix cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
  if (mean.size() != cov.dim()) {
    throw std::invalid_argument("GaussianBelief: mean/cov dimension mismatch");
  }
  if (!mean.allFinite()) {
    throw std::invalid_argument("GaussianBelief: non-finite mean");
  }
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), state_(mix(seed, stream)) {}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, mix(stream_, child));
}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::next_uniform() {
  // 53-bit mantissa mapped into (0, 1); never returns 0 or 1 exactly.
  const std::uint64_t bits = next_u64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngStream::next_gamma(double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0) {
    throw std::invalid_argument("next_gamma: shape and rate must be positive");
  }
  if (shape < 1.0) {
    // Boost trick: Gamma(a) = Gamma(a+1) * U^{1/a}.
    const double g = next_gamma(shape + 1.0, 1.0);
    const double u = next_uniform();
    return g * std::pow(u, 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x = next_normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = next_uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double gaussian_kl(const GaussianBelief& p, const GaussianBelief& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  }
  const int m = p.dim();
  const Matrix sq_inv_sp = q.cov.solve(p.cov.matrix());
  const Vector dmu = q.mean - p.mean;
  const double quad = dmu.dot(q.cov.solve(dmu));
  return 0.5 * (sq_inv_sp.trace() - m + quad + q.cov.log_det() - p.cov.log_det());
}

double mahalanobis_sq(const Vector& e, const SpdMatrix& r) {
  if (e.size() != r.dim()) {
    throw std::invalid_argument("mahalanobis_sq: dimension mismatch");
  }
  const Vector half = r.factor().triangularView<Eigen::Lower>().solve(e);
  return half.squaredNorm();
}

Vector sample_mvn(const GaussianBelief& belief, RngStream& rng) {
  Vector z(belief.dim());
  for (int i = 0; i < z.size(); ++i) z(i) = rng.next_normal();
  return belief.mean + belief.cov.factor() * z;
}

}  // namespace wolf
