#include "wolf/ensemble_filters.hpp"

#include <cmath>

namespace wolf {
namespace {

// Per-particle prediction draws yhat_i ~ N(h(theta_i), R), particle-major,
// dimension-minor.  All weighted variants share this sampling order.
Matrix sample_predictions(const Ensemble& ens, const NonlinearModel& model, RngStream& rng) {
  const int n = ens.count();
  const int d = model.obs_dim();
  const Matrix& chol_r = model.r.factor();
  Matrix preds(n, d);
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    const Vector h_theta = model.h(ens.particles.row(i).transpose());
    if (!h_theta.allFinite()) {
      throw std::runtime_error("enkf: observation map produced non-finite prediction");
    }
    for (int j = 0; j < d; ++j) z(j) = rng.next_normal();
    preds.row(i) = (h_theta + chol_r * z).transpose();
  }
  return preds;
}

std::vector<bool> all_mask(int d) { return std::vector<bool>(static_cast<size_t>(d), true); }

}  // namespace

Ensemble::Ensemble(Matrix p) : particles(std::move(p)) {
  if (particles.rows() < 1 || particles.cols() < 1) {
    throw std::invalid_argument("Ensemble: needs at least one particle and one dimension");
  }
  if (!particles.allFinite()) {
    throw std::invalid_argument("Ensemble: non-finite particle entries");
  }
}

Matrix Ensemble::covariance() const {
  if (count() < 2) {
    throw std::invalid_argument("Ensemble::covariance: needs at least two particles");
  }
  const Matrix centered = particles.rowwise() - particles.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(count() - 1);
}

Ensemble enkf_predict(const Ensemble& ens, const NonlinearModel& model, RngStream& rng) {
  if (ens.dim() != model.state_dim()) {
    throw std::invalid_argument("enkf_predict: dimension mismatch");
  }
  const int n = ens.count();
  const int m = ens.dim();
  const Matrix& chol_q = model.q.factor();
  Matrix out(n, m);
  Vector z(m);
  for (int i = 0; i < n; ++i) {
    const Vector moved = model.f(ens.particles.row(i).transpose());
    if (!moved.allFinite()) {
      throw std::runtime_error("enkf_predict: dynamics produced non-finite particle");
    }
    for (int j = 0; j < m; ++j) z(j) = rng.next_normal();
    out.row(i) = (moved + chol_q * z).transpose();
  }
  return Ensemble(std::move(out));
}

EnsembleGain enkf_gain(const Matrix& states, const Matrix& preds, const std::vector<bool>& mask) {
  const int n = static_cast<int>(states.rows());
  const int d = static_cast<int>(preds.cols());
  if (preds.rows() != n) throw std::invalid_argument("enkf_gain: particle count mismatch");
  if (static_cast<int>(mask.size()) != d) throw std::invalid_argument("enkf_gain: mask size mismatch");
  if (n < 2) throw std::invalid_argument("enkf_gain: needs at least two particles");

  std::vector<int> keep;
  for (int j = 0; j < d; ++j) {
    if (mask[static_cast<size_t>(j)]) keep.push_back(j);
  }
  if (keep.empty()) {
    return EnsembleGain{Matrix::Zero(states.cols(), 0)};
  }
  Matrix sub(n, static_cast<int>(keep.size()));
  for (size_t k = 0; k < keep.size(); ++k) sub.col(static_cast<int>(k)) = preds.col(keep[k]);

  const Matrix cs = states.rowwise() - states.colwise().mean();
  const Matrix cp = sub.rowwise() - sub.colwise().mean();
  const double denom = static_cast<double>(n - 1);
  const Matrix cross = (cs.transpose() * cp) / denom;      // m x |J|
  const Matrix var = symmetrize((cp.transpose() * cp) / denom);

  Eigen::LLT<Matrix> llt(var);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("enkf_gain: singular prediction variance");
  }
  // K = cross var^{-1}  via  K^T = var^{-1} cross^T.
  return EnsembleGain{llt.solve(cross.transpose()).transpose()};
}

Ensemble enkf_update(const Ensemble& ens, const NonlinearModel& model, const Vector& y,
                     RngStream& rng) {
  if (y.size() != model.obs_dim()) throw std::invalid_argument("enkf_update: dimension mismatch");
  const Matrix preds = sample_predictions(ens, model, rng);
  const Matrix gain = enkf_gain(ens.particles, preds, all_mask(model.obs_dim())).gain;
  Matrix out = ens.particles;
  for (int i = 0; i < ens.count(); ++i) {
    const Vector resid = y - preds.row(i).transpose();
    out.row(i) += (gain * resid).transpose();
  }
  return Ensemble(std::move(out));
}

std::pair<Ensemble, Vector> ap_enkf_update(const Ensemble& ens, const NonlinearModel& model,
                                           const Vector& y, double c, RngStream& rng,
                                           bool masked_gain) {
  if (y.size() != model.obs_dim()) throw std::invalid_argument("ap_enkf_update: dimension mismatch");
  const int d = model.obs_dim();
  const Matrix preds = sample_predictions(ens, model, rng);

  Vector w(d);
  for (int j = 0; j < d; ++j) {
    const double mean_sq = (preds.col(j).array() - y(j)).square().mean();
    w(j) = mean_sq <= c ? 1.0 : 0.0;
  }

  Matrix out = ens.particles;
  if (masked_gain) {
    std::vector<bool> mask(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) mask[static_cast<size_t>(j)] = w(j) > 0.0;
    const Matrix gain = enkf_gain(ens.particles, preds, mask).gain;
    if (gain.cols() > 0) {
      std::vector<int> keep;
      for (int j = 0; j < d; ++j) {
        if (w(j) > 0.0) keep.push_back(j);
      }
      Vector resid(static_cast<int>(keep.size()));
      for (int i = 0; i < ens.count(); ++i) {
        for (size_t k = 0; k < keep.size(); ++k) {
          resid(static_cast<int>(k)) = y(keep[k]) - preds(i, keep[k]);
        }
        out.row(i) += (gain * resid).transpose();
      }
    }
  } else {
    const Matrix gain = enkf_gain(ens.particles, preds, all_mask(d)).gain;
    for (int i = 0; i < ens.count(); ++i) {
      const Vector resid = w.asDiagonal() * (y - preds.row(i).transpose());
      out.row(i) += (gain * resid).transpose();
    }
  }
  return {Ensemble(std::move(out)), w};
}

std::pair<Ensemble, Matrix> pp_enkf_update(const Ensemble& ens, const NonlinearModel& model,
                                           const Vector& y, double c, RngStream& rng) {
  if (y.size() != model.obs_dim()) throw std::invalid_argument("pp_enkf_update: dimension mismatch");
  const int d = model.obs_dim();
  const Matrix preds = sample_predictions(ens, model, rng);
  const Matrix gain = enkf_gain(ens.particles, preds, all_mask(d)).gain;

  Matrix weights(ens.count(), d);
  Matrix out = ens.particles;
  for (int i = 0; i < ens.count(); ++i) {
    Vector resid = y - preds.row(i).transpose();
    for (int j = 0; j < d; ++j) {
      const double wij = (resid(j) * resid(j) <= c) ? 1.0 : 0.0;
      weights(i, j) = wij;
      resid(j) *= wij;
    }
    out.row(i) += (gain * resid).transpose();
  }
  return {Ensemble(std::move(out)), weights};
}

Ensemble hub_enkf_update(const Ensemble& ens, const NonlinearModel& model, const Vector& y,
                         double c, RngStream& rng) {
  if (y.size() != model.obs_dim()) throw std::invalid_argument("hub_enkf_update: dimension mismatch");
  if (!(c > 0.0)) throw std::invalid_argument("hub_enkf_update: c must be positive");
  const Matrix preds = sample_predictions(ens, model, rng);
  const Matrix gain = enkf_gain(ens.particles, preds, all_mask(model.obs_dim())).gain;

  Matrix out = ens.particles;
  for (int i = 0; i < ens.count(); ++i) {
    Vector resid = y - preds.row(i).transpose();
    resid = resid.cwiseMax(-c).cwiseMin(c);
    out.row(i) += (gain * resid).transpose();
  }
  return Ensemble(std::move(out));
}

Ensemble inflate(const Ensemble& ens, double lambda) {
  if (!(lambda >= 1.0)) throw std::invalid_argument("inflate: lambda must be >= 1");
  if (lambda == 1.0) return ens;
  const Eigen::RowVectorXd mean = ens.particles.colwise().mean();
  Matrix out = (ens.particles.rowwise() - mean) * lambda;
  out.rowwise() += mean;
  return Ensemble(std::move(out));
}

}  // namespace wolf
