#include "test_support.hpp"

#include <doctest.h>

#include <limits>

using namespace vse;
using namespace vse::test;

TEST_CASE("log_pdf matches closed forms") {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(log_pdf(normal1(0, 1), scalar(0)) == doctest::Approx(-half_log_2pi).epsilon(1e-14));
  CHECK(log_pdf(normal1(0, 1), scalar(1)) == doctest::Approx(-half_log_2pi - 0.5).epsilon(1e-14));
  const GaussianDensity g2(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(log_pdf(g2, vec({1, 1})) == doctest::Approx(-std::log(2.0 * std::numbers::pi) - 1.0).epsilon(1e-14));
}

TEST_CASE("log_pdf agrees with the explicit-inverse formula") {
  Rng rng{11};
  for (int i = 0; i < 50; ++i) {
    const auto g = random_gaussian(rng, 3);
    const Vector x = rng.normal(3);
    CHECK(std::abs(log_pdf(g, x) - direct_log_pdf(g.mean, g.cov, x)) < 1e-10);
  }
}

TEST_CASE("invalid densities are rejected") {
  CHECK_THROWS_AS(log_pdf(normal1(0, 1), vec({0, 0})), InputError);
  CHECK_THROWS_AS(GaussianDensity(scalar(0), mat1(-1)), NumericError);
  CHECK_THROWS_AS(GaussianDensity(Vector::Zero(2), (Matrix(2, 2) << 1, 0.5, 0.4, 1).finished()), InputError);
  try {
    GaussianDensity(scalar(0), mat1(0));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("covariance") != std::string::npos);
  }
}

TEST_CASE("categoricals normalize in the log domain") {
  const auto c = Categorical::from_log_weights(vec({-1000.0, -1000.0 + std::log(3.0)}));
  CHECK(c.probs(0) == doctest::Approx(0.25));
  CHECK(c.probs(1) == doctest::Approx(0.75));
  const double ninf = -std::numeric_limits<double>::infinity();
  const auto z = Categorical::from_log_weights(vec({0.0, ninf, 1.0}));
  CHECK(z.probs(1) == 0.0);
  CHECK(std::abs(z.probs.sum() - 1.0) < 1e-12);
  CHECK_THROWS_AS(Categorical::from_log_weights(vec({ninf, ninf})), NumericError);
  CHECK_THROWS_AS(Categorical(vec({0.5, 0.6})), InputError);
  CHECK_THROWS_AS(CategoricalKernel((Matrix(2, 2) << 0.5, 0.2, 0.4, 0.8).finished()), InputError);
}

namespace {

// Conditioning oracle for the joint [x; x'] with x ~ prior, x' = A x + b + e.
void check_predict_reverse(double m, double p, double a, double b, double q, double pred_mean, double pred_var,
                           double rev_slope, double rev_offset, double rev_var) {
  const auto pr = predict_and_reverse(normal1(m, p), kernel1(a, b, q));
  CHECK(pr.predictive.mean(0) == doctest::Approx(pred_mean).epsilon(1e-12));
  CHECK(pr.predictive.cov(0, 0) == doctest::Approx(pred_var).epsilon(1e-12));
  CHECK(pr.reverse.slope(0, 0) == doctest::Approx(rev_slope).epsilon(1e-12));
  CHECK(pr.reverse.offset(0) == doctest::Approx(rev_offset).epsilon(1e-12));
  CHECK(pr.reverse.cov(0, 0) == doctest::Approx(rev_var).epsilon(1e-12));
}

}  // namespace

TEST_CASE("predict_and_reverse: scalar examples against joint conditioning") {
  // cov(x, x') = a p, var(x') = a^2 p + q; slope = a p / var(x'), var = p - a^2 p^2 / var(x')
  check_predict_reverse(0, 1, 1, 0, 1, 0, 2, 0.5, 0, 0.5);
  check_predict_reverse(0, 1, 0.5, 0, 0.75, 0, 1, 0.5, 0, 0.75);
  CHECK_THROWS_AS(kernel1(1, 0, 0), NumericError);
  CHECK_THROWS_AS(predict_and_reverse(normal1(0, 1), kernel1(1, 0, 1e-12)), NumericError);
  CHECK_NOTHROW(predict_and_reverse_unguarded(normal1(0, 1), kernel1(1, 0, 1e-12)));
}

TEST_CASE("predict_and_reverse: joint identity at random probes") {
  Rng rng{12};
  for (int inst = 0; inst < 20; ++inst) {
    const Index d = 1 + inst % 3;
    const auto prior = random_gaussian(rng, d);
    const auto k = random_kernel(rng, d, d);
    const auto pr = predict_and_reverse(prior, k);
    CHECK((pr.predictive.cov - pr.predictive.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < 100; ++i) {
      const Vector x = 2.0 * rng.normal(d);
      const Vector xp = 2.0 * rng.normal(d);
      const double lhs = k.log_density(xp, x) + log_pdf(prior, x);
      const double rhs = log_pdf(pr.predictive, xp) + pr.reverse.log_density(x, xp);
      CHECK(std::abs(lhs - rhs) < 1e-9);
    }
  }
}

TEST_CASE("neg_relative_entropy examples and Monte Carlo cross-check") {
  CHECK(neg_relative_entropy(normal1(0, 1), normal1(0, 1)) == 0.0);
  CHECK(neg_relative_entropy(normal1(1, 1), normal1(0, 1)) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(neg_relative_entropy(normal1(0, 2), normal1(0, 1)) ==
        doctest::Approx(-0.5 * (0.5 - 1.0 + std::log(2.0))).epsilon(1e-12));

  Rng rng{13};
  const auto gs = normal1(1, 1);
  const auto g = normal1(0, 1);
  const auto mc = monte_carlo(1000000, [&] {
    const Vector x = rng.sample(g);
    return log_pdf(gs, x) - log_pdf(g, x);
  });
  CHECK(std::abs(mc.mean - neg_relative_entropy(gs, g)) < 3.0 * mc.std_error);

  for (int i = 0; i < 100; ++i) {
    const auto a = random_gaussian(rng, 2);
    const auto b = random_gaussian(rng, 2);
    CHECK(neg_relative_entropy(a, b) <= 1e-12);
  }
}

TEST_CASE("average_log_gaussians: defining identity") {
  const auto check_identity = [](const std::vector<GaussianDensity>& comps, const Categorical& w,
                                 const std::vector<double>& probes) {
    const auto avg = average_log_gaussians(comps, w);
    for (double x : probes) {
      double rhs = 0.0;
      for (std::size_t z = 0; z < comps.size(); ++z) rhs += w.probs(static_cast<Index>(z)) * log_pdf(comps[z], scalar(x));
      CHECK(std::abs(avg.log_zeta + log_pdf(avg.density, scalar(x)) - rhs) < 1e-10);
    }
    return avg;
  };
  const auto single = check_identity({normal1(0.3, 2.0)}, Categorical(vec({1.0})), {0, 1, 3});
  CHECK(single.log_zeta == doctest::Approx(0.0));
  CHECK(single.density.mean(0) == doctest::Approx(0.3));

  const auto two = check_identity({normal1(0, 1), normal1(2, 1)}, Categorical(vec({0.5, 0.5})), {0, 1, 3});
  CHECK(two.density.mean(0) == doctest::Approx(1.0));
  CHECK(two.density.cov(0, 0) == doctest::Approx(1.0));
  CHECK(two.log_zeta == doctest::Approx(-0.5).epsilon(1e-12));

  const auto wide = check_identity({normal1(0, 1), normal1(0, 4)}, Categorical(vec({0.5, 0.5})), {0, 1, 3});
  CHECK(wide.density.cov(0, 0) == doctest::Approx(1.6).epsilon(1e-12));

  Rng rng{14};
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<GaussianDensity> comps{random_gaussian(rng, 2), random_gaussian(rng, 2), random_gaussian(rng, 2)};
    Vector w(3);
    for (Index i = 0; i < 3; ++i) w(i) = rng.uniform() + 0.1;
    const Categorical weights(w / w.sum());
    const auto avg = average_log_gaussians(comps, weights);
    for (int k = 0; k < 10; ++k) {
      const Vector x = 2.0 * rng.normal(2);
      double rhs = 0.0;
      for (Index z = 0; z < 3; ++z) rhs += weights.probs(z) * log_pdf(comps[static_cast<std::size_t>(z)], x);
      CHECK(std::abs(avg.log_zeta + log_pdf(avg.density, x) - rhs) < 1e-10);
    }
  }
  CHECK_THROWS_AS(average_log_gaussians(std::vector<GaussianDensity>{}, Categorical(vec({1.0}))), InputError);
}

TEST_CASE("conditional relative entropy likelihood") {
  SUBCASE("identical kernels give the zero function") {
    Rng rng{15};
    const auto k = random_kernel(rng, 2, 2);
    const auto l = conditional_relative_entropy_likelihood(k, k);
    CHECK(l.H.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.y.cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(l(rng.normal(2))) < 1e-12);
  }
  SUBCASE("pure mean shift is -1/2 everywhere") {
    const auto l = conditional_relative_entropy_likelihood(kernel1(1, 0, 1), kernel1(1, 1, 1));
    for (double x : {-3.0, 0.0, 2.5}) CHECK(l(scalar(x)) == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("Monte Carlo cross-check") {
    Rng rng{16};
    const auto k1 = kernel1(1, 0, 1);
    const auto k2 = kernel1(0, 0, 1);
    const Vector x = scalar(1.5);
    const auto l = conditional_relative_entropy_likelihood(k1, k2);
    const GaussianDensity out(k1.mean_at(x), k1.cov);
    const auto mc = monte_carlo(1000000, [&] {
      const Vector xp = rng.sample(out);
      return k2.log_density(xp, x) - k1.log_density(xp, x);
    });
    CHECK(std::abs(mc.mean - l(x)) < 3.0 * mc.std_error);
    // Means 1.5 and 0 with unit variances.
    CHECK(l(x) == doctest::Approx(-1.125).epsilon(1e-12));
  }
  SUBCASE("closed form against exact Gaussian integral at random probes") {
    Rng rng{17};
    for (int i = 0; i < 50; ++i) {
      const auto k1 = random_kernel(rng, 2, 2);
      const auto k2 = random_kernel(rng, 2, 2);
      const auto l = conditional_relative_entropy_likelihood(k1, k2);
      const Vector x = rng.normal(2);
      const GaussianDensity out(k1.mean_at(x), k1.cov);
      const double exact = expected_log_pdf(GaussianDensity(k2.mean_at(x), k2.cov), out) + entropy(out);
      CHECK(std::abs(l(x) - exact) < 1e-10);
    }
  }
  CHECK_THROWS_AS(conditional_relative_entropy_likelihood(
                      kernel1(1, 0, 1), AffineGaussianKernel(Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2))),
                  InputError);
}

TEST_CASE("quadratic_times_gaussian") {
  const auto g = normal1(0, 1);
  const auto neutral = quadratic_times_gaussian(LogQuadraticForm::zero(1), g);
  CHECK(neutral.log_norm == doctest::Approx(0.0));
  CHECK(neutral.posterior.mean(0) == doctest::Approx(0.0));
  CHECK(neutral.posterior.cov(0, 0) == doctest::Approx(1.0));

  const auto prod = quadratic_times_gaussian(LogQuadraticForm::from_log_pdf(normal1(1, 1)), g);
  CHECK(prod.posterior.mean(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(prod.posterior.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(prod.log_norm == doctest::Approx(log_pdf(normal1(0, 2), scalar(1))).epsilon(1e-12));

  try {
    quadratic_times_gaussian(LogQuadraticForm(mat1(-2), scalar(0), 0), g);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("improper product") != std::string::npos);
  }

  Rng rng{18};
  for (int i = 0; i < 20; ++i) {
    const auto base = random_gaussian(rng, 2);
    const auto lq = LogQuadraticForm::likelihood(random_kernel(rng, 2, 2), rng.normal(2));
    const auto p = quadratic_times_gaussian(lq, base);
    for (int k = 0; k < 5; ++k) {
      const Vector x = rng.normal(2);
      CHECK(std::abs(lq(x) + log_pdf(base, x) - p.log_norm - log_pdf(p.posterior, x)) < 1e-10);
    }
  }
}

TEST_CASE("expect_affine, compose_joint and factor_joint") {
  Rng rng{19};
  const auto lq = LogQuadraticForm::from_log_pdf(random_gaussian(rng, 2));
  const auto k = random_kernel(rng, 2, 3);
  const auto form = expect_affine(lq, k.slope, k.offset, k.cov);
  const Vector x = rng.normal(3);
  CHECK(std::abs(form(x) - expectation(lq, GaussianDensity(k.mean_at(x), k.cov))) < 1e-10);
  const auto mc = monte_carlo(200000, [&] { return lq(rng.sample(GaussianDensity(k.mean_at(x), k.cov))); });
  CHECK(std::abs(mc.mean - form(x)) < 4.0 * mc.std_error);

  const auto marginal = random_gaussian(rng, 3);
  const auto joint = compose_joint(marginal, k);
  const auto split = factor_joint(joint, 2);
  CHECK((split.marginal.mean - marginal.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((split.marginal.cov - marginal.cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((split.conditional.slope - k.slope).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((split.conditional.offset - k.offset).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((split.conditional.cov - k.cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("global jitter is opt-in") {
  CHECK(global_jitter() == 0.0);
  CHECK_THROWS_AS(set_global_jitter(-1.0), InputError);
}
