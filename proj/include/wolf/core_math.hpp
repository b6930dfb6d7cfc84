#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace wolf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric positive definite matrix with a cached Cholesky factor.
///
/// Construction validates the input: the matrix must be symmetric to a
/// relative tolerance of 1e-12 and its Cholesky factorisation must succeed
/// with min(diag(L)) >= 1e-12 * max(diag(L)).  Validation failures throw;
/// callers that want jitter must add it explicitly.
class SpdMatrix {
 public:
  explicit SpdMatrix(Matrix m);

  static SpdMatrix identity(int n) { return SpdMatrix(Matrix::Identity(n, n)); }

  const Matrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

  /// Lower-triangular Cholesky factor L with L * L^T = matrix().
  const Matrix& factor() const { return chol_l_; }

  /// Solves A x = b for x.
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

  /// A^{-1} as a dense (symmetrised) matrix.
  Matrix inverse() const;

  double log_det() const;

 private:
  Matrix m_;
  Matrix chol_l_;
};

/// Gaussian state belief: mean vector and SPD covariance.
struct GaussianBelief {
  Vector mean;
  SpdMatrix cov;

  GaussianBelief(Vector mean_in, Matrix cov_in);
  GaussianBelief(Vector mean_in, SpdMatrix cov_in);

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Deterministic random stream identified by (seed, stream id).
///
/// The same pair always produces the same draw sequence, and distinct
/// stream ids give independent sequences, so parallel trials can pre-split
/// their streams and stay bit-reproducible regardless of scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Derives an independent child stream; the child's sequence is fixed by
  /// (seed, stream, child) and unaffected by draws made from this stream.
  RngStream split(std::uint64_t child) const;

  std::uint64_t next_u64();

  /// Uniform draw in the open interval (0, 1).
  double next_uniform();

  /// Standard normal draw (Box-Muller; two uniforms per draw).
  double next_normal();

  /// Gamma(shape, rate) draw via Marsaglia-Tsang.
  double next_gamma(double shape, double rate);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
};

/// (A + A^T) / 2.  Covariance updates re-symmetrise before validation since
/// floating-point drift accumulates over long filtering runs.
inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// KL(p || q) between two Gaussians of equal dimension:
///   0.5 * (tr(Sq^-1 Sp) - m + (mq-mp)^T Sq^-1 (mq-mp) + ln det Sq / det Sp).
double gaussian_kl(const GaussianBelief& p, const GaussianBelief& q);

/// e^T R^{-1} e computed through the Cholesky factor of R.
double mahalanobis_sq(const Vector& e, const SpdMatrix& r);

/// Draw mean + L z with z standard normal from the given stream.
Vector sample_mvn(const GaussianBelief& belief, RngStream& rng);

}  // namespace wolf
