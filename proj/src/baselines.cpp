#include "wolf/baselines.hpp"

#include <cmath>

namespace wolf {
namespace {

// One Bernoulli-gated update pass; shared by the linear and linearised paths.
// h_value(mu) and h_jac(mu) give the measurement mean and Jacobian.
GaussianBelief kfb_update_impl(const GaussianBelief& prior, const SpdMatrix& r, const Vector& y,
                               const KfBConfig& cfg, const VectorFn& h_value,
                               const std::function<Matrix(const Vector&)>& h_jac,
                               std::vector<double>* rho_trace) {
  const Vector yhat = h_value(prior.mean);
  const Matrix h_pred = h_jac(prior.mean);
  const Matrix prior_prec = prior.cov.inverse();
  const Matrix r_inv = r.inverse();
  const Matrix info = symmetrize(h_pred.transpose() * r_inv * h_pred);

  double rho = 1.0;
  double alpha = cfg.alpha0;
  double beta = cfg.beta0;
  Vector mu = prior.mean;
  Matrix sigma = prior.cov.matrix();

  for (int i = 0; i < cfg.inner_iters; ++i) {
    if (rho < cfg.tol) {
      mu = prior.mean;
      sigma = prior.cov.matrix();
    } else {
      // Gaussian update with R / rho.
      const Matrix post_prec = symmetrize(prior_prec + rho * info);
      sigma = SpdMatrix(post_prec).inverse();
      const Matrix gain = rho * sigma * h_pred.transpose() * r_inv;
      mu = prior.mean + gain * (y - yhat);
    }
    // Residual second moment, linearised at the running mean.
    const Vector resid = y - h_value(mu);
    const Matrix h_mu = h_jac(mu);
    const Matrix b = resid * resid.transpose() + h_mu * sigma * h_mu.transpose();
    const double log_pi = digamma(alpha) - digamma(alpha + beta + 1.0);
    const double log_one_minus_pi = digamma(beta + 1.0) - digamma(alpha + beta + 1.0);
    const double score = log_pi - 0.5 * (b * r_inv).trace();
    rho = 1.0 / (1.0 + std::exp(log_one_minus_pi - score));
    if (rho_trace) rho_trace->push_back(rho);
    alpha = cfg.alpha0 + rho;
    beta = cfg.beta0 + 1.0 - rho;
  }
  return GaussianBelief(std::move(mu), symmetrize(sigma));
}

}  // namespace

KfIwConfig::KfIwConfig(double ell_in, int inner_iters_in, Matrix r0_in)
    : ell(ell_in), inner_iters(inner_iters_in), r0(std::move(r0_in)) {
  if (!(ell > 0.0)) throw std::invalid_argument("KfIwConfig: ell must be positive");
  if (inner_iters < 1) throw std::invalid_argument("KfIwConfig: inner_iters must be >= 1");
}

KfBConfig::KfBConfig(double alpha0_in, double beta0_in, int inner_iters_in, double tol_in)
    : alpha0(alpha0_in), beta0(beta0_in), inner_iters(inner_iters_in), tol(tol_in) {
  if (!(alpha0 > 0.0) || !(beta0 > 0.0)) {
    throw std::invalid_argument("KfBConfig: prior shapes must be positive");
  }
  if (inner_iters < 1) throw std::invalid_argument("KfBConfig: inner_iters must be >= 1");
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("KfBConfig: tol must lie in (0, 1)");
}

GaussianBelief kfiw_update(const GaussianBelief& prior, const LinearObservation& obs,
                           const Vector& y, const KfIwConfig& cfg) {
  if (prior.dim() != obs.h.cols() || y.size() != obs.h.rows()) {
    throw std::invalid_argument("kfiw_update: dimension mismatch");
  }
  const Matrix& h = obs.h;
  const int m = prior.dim();
  const Matrix sigma_pred = prior.cov.matrix();
  const Vector innov_pred = y - h * prior.mean;

  Vector mu = prior.mean;
  Matrix sigma = sigma_pred;
  for (int i = 0; i < cfg.inner_iters; ++i) {
    const Vector resid = y - h * mu;
    const Matrix s = resid * resid.transpose() + h * sigma * h.transpose();
    const Matrix lambda = symmetrize((cfg.ell * cfg.r0.matrix() + s) / (cfg.ell + 1.0));
    const Matrix innov_cov = symmetrize(h * sigma_pred * h.transpose() + lambda);
    Eigen::LLT<Matrix> llt(innov_cov);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("kfiw_update: singular innovation matrix");
    }
    const Matrix gain = llt.solve(h * sigma_pred);  // d x m
    mu = prior.mean + gain.transpose() * innov_pred;
    const Matrix shrink = Matrix::Identity(m, m) - gain.transpose() * h;
    sigma = symmetrize(gain.transpose() * lambda * gain + shrink * sigma_pred * shrink.transpose());
  }
  return GaussianBelief(std::move(mu), std::move(sigma));
}

GaussianBelief kfb_update(const GaussianBelief& prior, const LinearObservation& obs,
                          const Vector& y, const KfBConfig& cfg,
                          std::vector<double>* rho_trace) {
  if (prior.dim() != obs.h.cols() || y.size() != obs.h.rows()) {
    throw std::invalid_argument("kfb_update: dimension mismatch");
  }
  const Matrix h = obs.h;
  return kfb_update_impl(
      prior, obs.r, y, cfg, [&h](const Vector& x) { return Vector(h * x); },
      [&h](const Vector&) { return h; }, rho_trace);
}

GaussianBelief kfb_update(const GaussianBelief& prior, const NonlinearModel& model,
                          const Vector& y, const KfBConfig& cfg,
                          std::vector<double>* rho_trace) {
  if (prior.dim() != model.state_dim() || y.size() != model.obs_dim()) {
    throw std::invalid_argument("kfb_update: dimension mismatch");
  }
  return kfb_update_impl(
      prior, model.r, y, cfg, model.h,
      [&model](const Vector& x) { return jacobian(model.h, model.h_jacobian, x); }, rho_trace);
}

double digamma(double x) {
  if (!(x > 0.0)) {
    throw std::invalid_argument("digamma: argument must be positive");
  }
  double value = 0.0;
  while (x < 6.0) {
    value -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - sum B_{2k} / (2k x^{2k}) through the x^{-12} term.
  double series = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
                  inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
  return value + std::log(x) - 0.5 * inv - series;
}

AdamState AdamState::init(int dim, double learning_rate, int inner_iters) {
  AdamState s;
  s.m = Vector::Zero(dim);
  s.v = Vector::Zero(dim);
  s.learning_rate = learning_rate;
  s.inner_iters = inner_iters;
  return s;
}

std::pair<Vector, AdamState> adam_ogd_step(const Vector& params, const GradientFn& grad_fn,
                                           AdamState state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_ogd_step: state/parameter dimension mismatch");
  }
  Vector p = params;
  for (int i = 0; i < state.inner_iters; ++i) {
    const Vector g = grad_fn(p);
    if (!g.allFinite()) throw std::runtime_error("adam_ogd_step: non-finite gradient");
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const Vector m_hat = state.m / bc1;
    const Vector v_hat = state.v / bc2;
    p -= state.learning_rate * (m_hat.array() / (v_hat.array().sqrt() + state.epsilon)).matrix();
  }
  return {std::move(p), std::move(state)};
}

}  // namespace wolf
