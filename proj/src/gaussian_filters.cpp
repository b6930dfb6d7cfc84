#include "wolf/gaussian_filters.hpp"

#include <cmath>

namespace wolf {
namespace {

SpdMatrix make_process_cov(Matrix q, bool* jittered) {
  *jittered = false;
  try {
    return SpdMatrix(q);
  } catch (const std::runtime_error&) {
    *jittered = true;
    q += 1e-12 * Matrix::Identity(q.rows(), q.cols());
    return SpdMatrix(std::move(q));
  }
}

// Shared core of the scalar-weight updates.  w_sq = 1 gives the plain KF.
UpdateOutcome precision_form_update(const GaussianBelief& prior, const Matrix& h,
                                    const SpdMatrix& r, const Vector& y, const Vector& yhat,
                                    double weight, double w_sq) {
  const int m = prior.dim();
  const Matrix r_inv_h = r.solve(h);                       // R^{-1} H
  const Matrix info = symmetrize(h.transpose() * r_inv_h); // H^T R^{-1} H
  const Matrix post_prec = symmetrize(prior.cov.inverse() + w_sq * info);
  Eigen::LLT<Matrix> prec_llt(post_prec);
  if (prec_llt.info() != Eigen::Success) {
    throw std::runtime_error("update: posterior precision is not positive definite");
  }
  Matrix post_cov = symmetrize(prec_llt.solve(Matrix::Identity(m, m)));
  const Matrix gain = w_sq * post_cov * r_inv_h.transpose();
  const Vector innovation = y - yhat;
  Vector mean = prior.mean + gain * innovation;
  Vector weight_vec(1);
  weight_vec << weight;
  return UpdateOutcome{GaussianBelief(std::move(mean), std::move(post_cov)),
                       std::move(weight_vec), innovation, gain.norm()};
}

}  // namespace

LinearDynamics::LinearDynamics(Matrix f_in, Matrix q_in)
    : f(std::move(f_in)), q(make_process_cov(std::move(q_in), &q_jittered)) {
  if (f.rows() != f.cols() || f.rows() != q.dim()) {
    throw std::invalid_argument("LinearDynamics: F/Q dimension mismatch");
  }
}

LinearObservation::LinearObservation(Matrix h_in, Matrix r_in)
    : h(std::move(h_in)), r(std::move(r_in)) {
  if (h.rows() != r.dim()) {
    throw std::invalid_argument("LinearObservation: H/R dimension mismatch");
  }
}

NonlinearModel::NonlinearModel(VectorFn f_in, VectorFn h_in, Matrix q_in, Matrix r_in,
                               std::optional<JacobianFn> f_jac, std::optional<JacobianFn> h_jac,
                               const Vector& debug_probe_state)
    : f(std::move(f_in)),
      h(std::move(h_in)),
      q(std::move(q_in)),
      r(std::move(r_in)),
      f_jacobian(std::move(f_jac)),
      h_jacobian(std::move(h_jac)) {
#ifndef NDEBUG
  if (debug_probe_state.size() == state_dim()) {
    const double tol = 1e-4;
    if (f_jacobian) {
      const Matrix a = (*f_jacobian)(debug_probe_state);
      const Matrix n = numerical_jacobian(f, debug_probe_state);
      if ((a - n).norm() > tol * std::max(1.0, n.norm())) {
        throw std::logic_error("NonlinearModel: analytic f Jacobian disagrees with finite differences");
      }
    }
    if (h_jacobian) {
      const Matrix a = (*h_jacobian)(debug_probe_state);
      const Matrix n = numerical_jacobian(h, debug_probe_state);
      if ((a - n).norm() > tol * std::max(1.0, n.norm())) {
        throw std::logic_error("NonlinearModel: analytic h Jacobian disagrees with finite differences");
      }
    }
  }
#else
  (void)debug_probe_state;
#endif
}

GaussianBelief kf_predict(const GaussianBelief& prior, const LinearDynamics& dyn) {
  if (prior.dim() != dyn.f.cols()) {
    throw std::invalid_argument("kf_predict: dimension mismatch");
  }
  if (dyn.f.isIdentity(0.0)) {
    // Static-state dynamics; F Sigma F^T with F = I is exactly Sigma.
    return GaussianBelief(prior.mean, Matrix(prior.cov.matrix() + dyn.q.matrix()));
  }
  Vector mean = dyn.f * prior.mean;
  Matrix cov = symmetrize(dyn.f * prior.cov.matrix() * dyn.f.transpose() + dyn.q.matrix());
  return GaussianBelief(std::move(mean), std::move(cov));
}

UpdateOutcome kf_update(const GaussianBelief& prior, const LinearObservation& obs,
                        const Vector& y) {
  if (prior.dim() != obs.h.cols() || y.size() != obs.h.rows()) {
    throw std::invalid_argument("kf_update: dimension mismatch");
  }
  const Vector yhat = obs.h * prior.mean;
  return precision_form_update(prior, obs.h, obs.r, y, yhat, 1.0, 1.0);
}

UpdateOutcome wolf_update(const GaussianBelief& prior, const LinearObservation& obs,
                          const Vector& y, const WeightSpec& spec) {
  if (prior.dim() != obs.h.cols() || y.size() != obs.h.rows()) {
    throw std::invalid_argument("wolf_update: dimension mismatch");
  }
  const Vector yhat = obs.h * prior.mean;
  const double w = compute_weight(spec, y, yhat, obs.r);
  if (w == 0.0) {
    Vector weight_vec(1);
    weight_vec << 0.0;
    return UpdateOutcome{prior, std::move(weight_vec), y - yhat, 0.0};
  }
  return precision_form_update(prior, obs.h, obs.r, y, yhat, w, w * w);
}

UpdateOutcome wolf_update_dimwise(const GaussianBelief& prior, const LinearObservation& obs,
                                  const Vector& y, const Vector& w) {
  const int d = static_cast<int>(obs.h.rows());
  if (prior.dim() != obs.h.cols() || y.size() != d || w.size() != d) {
    throw std::invalid_argument("wolf_update_dimwise: dimension mismatch");
  }
  if ((w.array() < 0.0).any() || (w.array() > 1.0).any()) {
    throw std::invalid_argument("wolf_update_dimwise: weights must lie in [0, 1]");
  }
  const Vector yhat = obs.h * prior.mean;
  const Vector innovation = y - yhat;
  if ((w.array() == 0.0).all()) {
    return UpdateOutcome{prior, w, innovation, 0.0};
  }
  // Rbar^{-1} = Diag(w) R^{-1} Diag(w)
  const int m = prior.dim();
  const Matrix rbar_inv = w.asDiagonal() * obs.r.inverse() * w.asDiagonal();
  const Matrix info = symmetrize(obs.h.transpose() * rbar_inv * obs.h);
  const Matrix post_prec = symmetrize(prior.cov.inverse() + info);
  Eigen::LLT<Matrix> prec_llt(post_prec);
  if (prec_llt.info() != Eigen::Success) {
    throw std::runtime_error("update: posterior precision is not positive definite");
  }
  Matrix post_cov = symmetrize(prec_llt.solve(Matrix::Identity(m, m)));
  const Matrix gain = post_cov * obs.h.transpose() * rbar_inv;
  Vector mean = prior.mean + gain * innovation;
  return UpdateOutcome{GaussianBelief(std::move(mean), std::move(post_cov)), w, innovation,
                       gain.norm()};
}

Matrix numerical_jacobian(const VectorFn& fn, const Vector& x) {
  const Vector fx = fn(x);
  if (!fx.allFinite()) {
    throw std::runtime_error("numerical_jacobian: map is non-finite at the base point");
  }
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(fx.size());
  Matrix jac(m, n);
  Vector xp = x;
  for (int i = 0; i < n; ++i) {
    const double step = 1e-6 * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + step;
    const Vector fp = fn(xp);
    xp(i) = x(i) - step;
    const Vector fm = fn(xp);
    xp(i) = x(i);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw std::runtime_error("numerical_jacobian: map is non-finite at a probe point");
    }
    jac.col(i) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

Matrix jacobian(const VectorFn& fn, const std::optional<JacobianFn>& analytic, const Vector& x) {
  if (analytic) return (*analytic)(x);
  return numerical_jacobian(fn, x);
}

GaussianBelief ekf_predict(const GaussianBelief& prior, const NonlinearModel& model) {
  if (prior.dim() != model.state_dim()) {
    throw std::invalid_argument("ekf_predict: dimension mismatch");
  }
  const Matrix f_jac = jacobian(model.f, model.f_jacobian, prior.mean);
  Vector mean = model.f(prior.mean);
  if (!mean.allFinite()) {
    throw std::runtime_error("ekf_predict: dynamics produced non-finite state");
  }
  Matrix cov = symmetrize(f_jac * prior.cov.matrix() * f_jac.transpose() + model.q.matrix());
  return GaussianBelief(std::move(mean), std::move(cov));
}

UpdateOutcome ekf_update(const GaussianBelief& prior, const NonlinearModel& model,
                         const Vector& y, const WeightSpec& spec) {
  if (prior.dim() != model.state_dim() || y.size() != model.obs_dim()) {
    throw std::invalid_argument("ekf_update: dimension mismatch");
  }
  const Vector yhat = model.h(prior.mean);
  const Matrix h_jac = jacobian(model.h, model.h_jacobian, prior.mean);
  const LinearObservation linearised(h_jac, model.r.matrix());

  if (spec.kind == WeightKind::kPerDimTmd) {
    const Matrix& r = model.r.matrix();
    Matrix off = r;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-12 * r.diagonal().cwiseAbs().maxCoeff()) {
      throw std::invalid_argument("ekf_update: PerDimTMD requires a diagonal R");
    }
    const Vector w = compute_weight_vector(spec, y, yhat, r.diagonal());
    // Rebuild the update around the linearisation point yhat rather than H mu.
    UpdateOutcome out = wolf_update_dimwise(prior, linearised, y - yhat + h_jac * prior.mean, w);
    out.innovation = y - yhat;
    return out;
  }

  const double w = compute_weight(spec, y, yhat, model.r);
  if (w == 0.0) {
    Vector weight_vec(1);
    weight_vec << 0.0;
    return UpdateOutcome{prior, std::move(weight_vec), y - yhat, 0.0};
  }
  return precision_form_update(prior, h_jac, model.r, y, yhat, w, w * w);
}

}  // namespace wolf
