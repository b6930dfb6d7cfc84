#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/oracles.hpp"
#include "wolf/gaussian_filters.hpp"

#include <cmath>

using namespace wolf;

namespace {

GaussianBelief scalar_belief(double mean, double var) {
  Vector m(1);
  m << mean;
  Matrix c(1, 1);
  c << var;
  return GaussianBelief(m, c);
}

LinearObservation scalar_obs(double h, double r) {
  Matrix hm(1, 1), rm(1, 1);
  hm << h;
  rm << r;
  return LinearObservation(hm, rm);
}

Vector scalar(double v) {
  Vector x(1);
  x << v;
  return x;
}

struct RandomInstance {
  GaussianBelief prior;
  LinearObservation obs;
  Vector y;
};

RandomInstance random_instance(RngStream& rng, int max_dim = 5) {
  const int m = 1 + static_cast<int>(rng.next_uniform() * max_dim);
  const int d = 1 + static_cast<int>(rng.next_uniform() * max_dim);
  GaussianBelief prior(test::random_vector(m, rng), test::random_spd(m, rng));
  LinearObservation obs(test::random_matrix(d, m, rng), test::random_spd(d, rng));
  Vector y = test::random_vector(d, rng);
  return RandomInstance{std::move(prior), std::move(obs), std::move(y)};
}

}  // namespace

TEST_CASE("kf_predict") {
  SUBCASE("identity dynamics with zero noise leave the belief unchanged") {
    const GaussianBelief prior(Vector::Ones(3), Matrix::Identity(3, 3));
    const LinearDynamics dyn(Matrix::Identity(3, 3), Matrix::Zero(3, 3));
    CHECK(dyn.q_jittered);  // zero Q gets the documented 1e-12 jitter
    const GaussianBelief pred = kf_predict(prior, dyn);
    CHECK((pred.mean - prior.mean).norm() == 0.0);
    CHECK((pred.cov.matrix() - prior.cov.matrix()).norm() < 1e-10);
  }
  SUBCASE("scalar hand case") {
    Matrix f(1, 1), q(1, 1);
    f << 2.0;
    q << 1.0;
    const GaussianBelief pred = kf_predict(scalar_belief(1.0, 1.0), LinearDynamics(f, q));
    CHECK(pred.mean(0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(pred.cov.matrix()(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
  }
  SUBCASE("constant-velocity transition moves position by delta * velocity") {
    Matrix f = Matrix::Identity(4, 4);
    f(0, 2) = 0.1;
    f(1, 3) = 0.1;
    Vector mu(4);
    mu << 0.0, 0.0, 1.0, 1.0;
    const GaussianBelief pred =
        kf_predict(GaussianBelief(mu, Matrix::Identity(4, 4)), LinearDynamics(f, Matrix::Zero(4, 4)));
    Vector expected(4);
    expected << 0.1, 0.1, 1.0, 1.0;
    CHECK((pred.mean - expected).norm() < 1e-14);
  }
}

TEST_CASE("kf_update") {
  SUBCASE("scalar conjugate hand case") {
    const auto out = kf_update(scalar_belief(0.0, 1.0), scalar_obs(1.0, 1.0), scalar(2.0));
    CHECK(out.posterior.mean(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.posterior.cov.matrix()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.weight(0) == 1.0);
  }
  SUBCASE("zero observation matrix keeps the prior") {
    RngStream rng(3, 0);
    const GaussianBelief prior(test::random_vector(3, rng), test::random_spd(3, rng));
    const LinearObservation obs(Matrix::Zero(2, 3), Matrix::Identity(2, 2));
    const auto out = kf_update(prior, obs, Vector::Ones(2));
    CHECK((out.posterior.mean - prior.mean).norm() < 1e-12);
    CHECK((out.posterior.cov.matrix() - prior.cov.matrix()).norm() < 1e-10);
  }
  SUBCASE("zero innovation leaves the mean unchanged") {
    RngStream rng(4, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = random_instance(rng);
      const Vector y = inst.obs.h * inst.prior.mean;
      const auto out = kf_update(inst.prior, inst.obs, y);
      CHECK((out.posterior.mean - inst.prior.mean).norm() < 1e-9);
      const auto oracle = test::conjugate_update_oracle(inst.prior, inst.obs.h,
                                                        inst.obs.r.matrix(), y);
      CHECK((out.posterior.cov.matrix() - oracle.cov.matrix()).norm() < 1e-8);
    }
  }
  SUBCASE("matches explicit joint-Gaussian conditioning on random instances") {
    RngStream rng(5, 0);
    for (int rep = 0; rep < 50; ++rep) {
      const auto inst = random_instance(rng);
      const auto out = kf_update(inst.prior, inst.obs, inst.y);
      const auto oracle =
          test::conjugate_update_oracle(inst.prior, inst.obs.h, inst.obs.r.matrix(), inst.y);
      CHECK((out.posterior.mean - oracle.mean).norm() < 1e-8);
      CHECK((out.posterior.cov.matrix() - oracle.cov.matrix()).norm() < 1e-8);
    }
  }
}

TEST_CASE("wolf_update") {
  SUBCASE("constant weight one recovers the Kalman update") {
    RngStream rng(6, 0);
    for (int rep = 0; rep < 50; ++rep) {
      const auto inst = random_instance(rng);
      const auto kf = kf_update(inst.prior, inst.obs, inst.y);
      const auto wolf = wolf_update(inst.prior, inst.obs, inst.y, WeightSpec::constant(1.0));
      CHECK((kf.posterior.mean - wolf.posterior.mean).norm() < 1e-10);
      CHECK((kf.posterior.cov.matrix() - wolf.posterior.cov.matrix()).norm() < 1e-10);
    }
  }
  SUBCASE("rejected measurement returns the prior exactly") {
    RngStream rng(7, 0);
    const GaussianBelief prior(test::random_vector(2, rng), test::random_spd(2, rng));
    const LinearObservation obs(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    const auto out = wolf_update(prior, obs, Vector::Constant(2, 1e6), WeightSpec::tmd(1e-8));
    CHECK(out.weight(0) == 0.0);
    CHECK(out.posterior.mean == prior.mean);
    CHECK(out.posterior.cov.matrix() == prior.cov.matrix());
  }
  SUBCASE("scalar hand case with forced w^2 = 0.25") {
    const auto out = wolf_update(scalar_belief(0.0, 1.0), scalar_obs(1.0, 1.0), scalar(2.0),
                                 WeightSpec::constant(0.5));
    CHECK(out.posterior.cov.matrix()(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(out.posterior.mean(0) == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("constant weight w equals the Kalman update with R / w^2") {
    RngStream rng(8, 0);
    for (double w : {0.1, 0.5, 0.9}) {
      for (int rep = 0; rep < 50; ++rep) {
        const auto inst = random_instance(rng);
        const auto wolf = wolf_update(inst.prior, inst.obs, inst.y, WeightSpec::constant(w));
        const LinearObservation scaled(inst.obs.h, Matrix(inst.obs.r.matrix() / (w * w)));
        const auto kf = kf_update(inst.prior, scaled, inst.y);
        CHECK((wolf.posterior.mean - kf.posterior.mean).norm() < 1e-10);
        CHECK((wolf.posterior.cov.matrix() - kf.posterior.cov.matrix()).norm() < 1e-10);
      }
    }
  }
  SUBCASE("posterior covariance never shrinks below the full-weight posterior") {
    RngStream rng(9, 0);
    for (int rep = 0; rep < 30; ++rep) {
      const auto inst = random_instance(rng);
      const double w = 0.05 + 0.9 * rng.next_uniform();
      const auto full = wolf_update(inst.prior, inst.obs, inst.y, WeightSpec::constant(1.0));
      const auto partial = wolf_update(inst.prior, inst.obs, inst.y, WeightSpec::constant(w));
      const Matrix diff = partial.posterior.cov.matrix() - full.posterior.cov.matrix();
      // Loewner order via Cholesky of the (strictly PD for w < 1) difference.
      Eigen::LLT<Matrix> llt(symmetrize(diff) + 1e-12 * Matrix::Identity(diff.rows(), diff.cols()));
      CHECK(llt.info() == Eigen::Success);
    }
  }
  SUBCASE("full-weight update never increases covariance (information gain)") {
    RngStream rng(10, 0);
    for (int rep = 0; rep < 30; ++rep) {
      const auto inst = random_instance(rng);
      const auto out = kf_update(inst.prior, inst.obs, inst.y);
      const Matrix diff = inst.prior.cov.matrix() - out.posterior.cov.matrix();
      Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(diff));
      CHECK(es.eigenvalues().minCoeff() > -1e-9);
    }
  }
}

TEST_CASE("wolf_update_dimwise") {
  RngStream rng(11, 0);
  SUBCASE("all-ones weights equal the Kalman update") {
    for (int rep = 0; rep < 20; ++rep) {
      const auto inst = random_instance(rng);
      const int d = static_cast<int>(inst.obs.h.rows());
      const auto kf = kf_update(inst.prior, inst.obs, inst.y);
      const auto dim = wolf_update_dimwise(inst.prior, inst.obs, inst.y, Vector::Ones(d));
      CHECK((kf.posterior.mean - dim.posterior.mean).norm() < 1e-9);
      CHECK((kf.posterior.cov.matrix() - dim.posterior.cov.matrix()).norm() < 1e-9);
    }
  }
  SUBCASE("all-zero weights return the prior") {
    const auto inst = random_instance(rng);
    const int d = static_cast<int>(inst.obs.h.rows());
    const auto out = wolf_update_dimwise(inst.prior, inst.obs, inst.y, Vector::Zero(d));
    CHECK(out.posterior.mean == inst.prior.mean);
    CHECK(out.posterior.cov.matrix() == inst.prior.cov.matrix());
  }
  SUBCASE("binary weights equal the Kalman update on the kept sub-observation") {
    for (int rep = 0; rep < 30; ++rep) {
      const int m = 3, d = 3;
      const GaussianBelief prior(test::random_vector(m, rng), test::random_spd(m, rng));
      const LinearObservation obs(test::random_matrix(d, m, rng), test::random_spd(d, rng));
      const Vector y = test::random_vector(d, rng);
      Vector w(d);
      int kept = 0;
      for (int j = 0; j < d; ++j) {
        w(j) = rng.next_uniform() < 0.5 ? 1.0 : 0.0;
        kept += static_cast<int>(w(j));
      }
      if (kept == 0 || kept == d) continue;

      // Oracle: plain KF on the rows with weight one.  Dropping rows of a
      // correlated R is exactly what Diag(w) R^{-1} Diag(w) does not do, so
      // restrict to diagonal R for the equivalence.
      Matrix r_diag = Matrix::Zero(d, d);
      for (int j = 0; j < d; ++j) r_diag(j, j) = 0.5 + rng.next_uniform();
      const LinearObservation obs_diag(obs.h, r_diag);
      const auto dim = wolf_update_dimwise(prior, obs_diag, y, w);

      Matrix h_sub(kept, m);
      Matrix r_sub = Matrix::Zero(kept, kept);
      Vector y_sub(kept);
      int k = 0;
      for (int j = 0; j < d; ++j) {
        if (w(j) == 1.0) {
          h_sub.row(k) = obs_diag.h.row(j);
          r_sub(k, k) = r_diag(j, j);
          y_sub(k) = y(j);
          ++k;
        }
      }
      const auto sub = kf_update(prior, LinearObservation(h_sub, r_sub), y_sub);
      CHECK((dim.posterior.mean - sub.posterior.mean).norm() < 1e-9);
      CHECK((dim.posterior.cov.matrix() - sub.posterior.cov.matrix()).norm() < 1e-9);
    }
  }
  SUBCASE("weights outside [0,1] are rejected") {
    const auto inst = random_instance(rng);
    const int d = static_cast<int>(inst.obs.h.rows());
    CHECK_THROWS_AS(wolf_update_dimwise(inst.prior, inst.obs, inst.y, Vector::Constant(d, 1.5)),
                    std::invalid_argument);
  }
}

TEST_CASE("jacobian") {
  SUBCASE("linear maps are exact (analytic) and 1e-8 close (numeric)") {
    RngStream rng(12, 0);
    const Matrix h = test::random_matrix(3, 4, rng);
    const VectorFn fn = [&h](const Vector& x) { return Vector(h * x); };
    const Vector x = test::random_vector(4, rng);
    const Matrix numeric = numerical_jacobian(fn, x);
    CHECK((numeric - h).norm() < 1e-8 * h.norm());
    const JacobianFn analytic = [&h](const Vector&) { return h; };
    CHECK(jacobian(fn, analytic, x) == h);
  }
  SUBCASE("sin at zero") {
    const VectorFn fn = [](const Vector& x) {
      Vector out(1);
      out << std::sin(x(0));
      return out;
    };
    CHECK(numerical_jacobian(fn, Vector::Zero(1))(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("x^2 at 3") {
    const VectorFn fn = [](const Vector& x) {
      Vector out(1);
      out << x(0) * x(0);
      return out;
    };
    CHECK(numerical_jacobian(fn, Vector::Constant(1, 3.0))(0, 0) ==
          doctest::Approx(6.0).epsilon(1e-6));
  }
  SUBCASE("non-finite map output is an error") {
    const VectorFn fn = [](const Vector& x) {
      Vector out(1);
      out << std::log(x(0));
      return out;
    };
    CHECK_THROWS_AS(numerical_jacobian(fn, Vector::Zero(1)), std::runtime_error);
  }
}

TEST_CASE("ekf_predict") {
  SUBCASE("linear dynamics match kf_predict") {
    RngStream rng(13, 0);
    const Matrix f = test::random_matrix(3, 3, rng);
    const Matrix q = test::random_spd(3, rng);
    const GaussianBelief prior(test::random_vector(3, rng), test::random_spd(3, rng));
    const NonlinearModel model([&f](const Vector& x) { return Vector(f * x); },
                               [](const Vector& x) { return x; }, q, Matrix::Identity(3, 3));
    const GaussianBelief nl = ekf_predict(prior, model);
    const GaussianBelief lin = kf_predict(prior, LinearDynamics(f, q));
    CHECK((nl.mean - lin.mean).norm() < 1e-9);
    CHECK((nl.cov.matrix() - lin.cov.matrix()).norm() < 1e-6 * lin.cov.matrix().norm());
  }
  SUBCASE("cubic map at mu = 1 squares the slope 3 into the covariance") {
    const NonlinearModel model(
        [](const Vector& x) { return Vector(x.array().pow(3.0).matrix()); },
        [](const Vector& x) { return x; }, Matrix(1e-30 * Matrix::Identity(1, 1)),
        Matrix::Identity(1, 1));
    const GaussianBelief pred = ekf_predict(scalar_belief(1.0, 0.01), model);
    CHECK(pred.mean(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pred.cov.matrix()(0, 0) == doctest::Approx(0.09).epsilon(1e-5));
  }
}

TEST_CASE("ekf_update") {
  SUBCASE("linear observation with constant weight matches kf_update") {
    RngStream rng(14, 0);
    const Matrix h = test::random_matrix(2, 3, rng);
    const Matrix r = test::random_spd(2, rng);
    const GaussianBelief prior(test::random_vector(3, rng), test::random_spd(3, rng));
    const Vector y = test::random_vector(2, rng);
    const NonlinearModel model(
        [](const Vector& x) { return x; }, [&h](const Vector& x) { return Vector(h * x); },
        Matrix::Identity(3, 3), r, std::nullopt, JacobianFn([&h](const Vector&) { return h; }));
    const auto nl = ekf_update(prior, model, y, WeightSpec::constant(1.0));
    const auto lin = kf_update(prior, LinearObservation(h, r), y);
    CHECK((nl.posterior.mean - lin.posterior.mean).norm() < 1e-10);
    CHECK((nl.posterior.cov.matrix() - lin.posterior.cov.matrix()).norm() < 1e-10);
  }
  SUBCASE("quadratic sensor hand case") {
    const NonlinearModel model(
        [](const Vector& x) { return x; },
        [](const Vector& x) { return Vector(x.cwiseProduct(x)); },
        Matrix(1e-30 * Matrix::Identity(1, 1)), Matrix::Identity(1, 1));
    const auto out = ekf_update(scalar_belief(1.0, 0.01), model, scalar(1.2),
                                WeightSpec::constant(1.0));
    CHECK(out.posterior.cov.matrix()(0, 0) == doctest::Approx(1.0 / 104.0).epsilon(1e-4));
    CHECK(out.posterior.mean(0) == doctest::Approx(1.0 + (2.0 / 104.0) * 0.2).epsilon(1e-4));
  }
  SUBCASE("tiny TMD threshold rejects a wild measurement") {
    const NonlinearModel model(
        [](const Vector& x) { return x; }, [](const Vector& x) { return x; },
        Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    RngStream rng(15, 0);
    const GaussianBelief prior(test::random_vector(2, rng), test::random_spd(2, rng));
    const auto out = ekf_update(prior, model, Vector::Constant(2, 1e5), WeightSpec::tmd(1e-6));
    CHECK(out.posterior.mean == prior.mean);
    CHECK(out.posterior.cov.matrix() == prior.cov.matrix());
  }
  SUBCASE("per-dimension TMD routes through the dimension-wise update") {
    const NonlinearModel model(
        [](const Vector& x) { return x; }, [](const Vector& x) { return x; },
        Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    RngStream rng(16, 0);
    const GaussianBelief prior(test::random_vector(2, rng), test::random_spd(2, rng));
    Vector y(2);
    y << prior.mean(0) + 0.1, 1e6;  // second dimension is a wild outlier
    const auto out = ekf_update(prior, model, y, WeightSpec::per_dim_tmd(9.0));
    CHECK(out.weight.size() == 2);
    CHECK(out.weight(0) == 1.0);
    CHECK(out.weight(1) == 0.0);
    // The outlier dimension contributes nothing: posterior matches the
    // one-dimensional update on the first component alone.
    Matrix h_sub(1, 2);
    h_sub << 1.0, 0.0;
    const auto sub =
        kf_update(prior, LinearObservation(h_sub, Matrix::Identity(1, 1)), y.head(1));
    CHECK((out.posterior.mean - sub.posterior.mean).norm() < 1e-9);
    CHECK((out.posterior.cov.matrix() - sub.posterior.cov.matrix()).norm() < 1e-9);
  }
}
