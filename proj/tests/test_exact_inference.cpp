#include "test_support.hpp"

#include <doctest.h>

using namespace vse;
using namespace vse::test;

namespace {

LinearGaussianSystem scalar_system(double m0, double p0, std::vector<std::array<double, 3>> transitions,
                                   std::vector<std::array<double, 3>> observations) {
  LinearGaussianSystem sys{normal1(m0, p0), {}, {}};
  for (const auto& k : transitions) sys.transitions.push_back(kernel1(k[0], k[1], k[2]));
  for (const auto& k : observations) sys.observations.push_back(kernel1(k[0], k[1], k[2]));
  return sys;
}

Observations head(const Observations& y, Index t) {
  return Observations(y.begin(), y.begin() + t + 1);
}

}  // namespace

TEST_CASE("kalman_filter: single conjugate update") {
  const auto sys = scalar_system(0, 1, {}, {{1, 0, 1}});
  const auto kf = kalman_filter(sys, {scalar(0)});
  CHECK(kf.filtered[0].mean(0) == doctest::Approx(0.0));
  CHECK(kf.filtered[0].cov(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(kf.log_evidence == doctest::Approx(log_pdf(normal1(0, 2), scalar(0))).epsilon(1e-14));
}

TEST_CASE("kalman_filter: uninformative observation leaves the prior") {
  const auto sys = scalar_system(0.7, 2.0, {}, {{1, 0, 1e12}});
  const auto kf = kalman_filter(sys, {scalar(3.0)});
  CHECK(std::abs(kf.filtered[0].mean(0) - 0.7) < 1e-6 * 0.7);
  CHECK(std::abs(kf.filtered[0].cov(0, 0) - 2.0) < 1e-6 * 2.0);
}

TEST_CASE("kalman_filter and rts_smoother against the joint-Gaussian oracle") {
  Rng rng{21};
  for (int inst = 0; inst < 30; ++inst) {
    const Index d = 1 + inst % 2;
    const Index T = 1 + inst % 6;
    const auto sys = random_linear_system(rng, d, T);
    const auto y = sample_observations(sys, rng);
    const JointOracle oracle(sys);
    const auto kf = kalman_filter(sys, y);
    CHECK(std::abs(kf.log_evidence - oracle.log_evidence(y)) < 1e-9);
    for (Index t = 0; t <= T; ++t) {
      const JointOracle prefix(JointOracle::prefix(sys, t));
      CHECK(std::abs(kf.cumulative_log_evidence(t) - prefix.log_evidence(head(y, t))) < 1e-9);
      CHECK(max_abs_diff(kf.filtered[static_cast<std::size_t>(t)], prefix.smoothing(head(y, t), t)) < 1e-9);
    }
    const auto rts = rts_smoother(sys, kf);
    for (Index t = 0; t <= T; ++t) {
      CHECK(max_abs_diff(rts.marginals[static_cast<std::size_t>(t)], oracle.smoothing(y, t)) < 1e-9);
    }
    // Reverse kernels reproduce the marginals.
    for (Index t = T; t >= 1; --t) {
      const auto pushed = rts.reverse_kernels[static_cast<std::size_t>(t - 1)].push(rts.marginals[static_cast<std::size_t>(t)]);
      CHECK(max_abs_diff(pushed, rts.marginals[static_cast<std::size_t>(t - 1)]) < 1e-9);
    }
  }
}

TEST_CASE("rts_smoother edge cases") {
  const auto one = scalar_system(0, 1, {}, {{1, 0, 1}});
  const auto kf = kalman_filter(one, {scalar(0.4)});
  const auto rts = rts_smoother(one, kf);
  CHECK(max_abs_diff(rts.marginals[0], kf.filtered[0]) < 1e-15);

  // Near-static state seen twice: the smoothed x_0 is the filtered x_1.
  const auto sys = scalar_system(0, 1, {{1, 0, 1e-12}}, {{1, 0, 1}, {1, 0, 1}});
  const Observations y{scalar(0.8), scalar(0.8)};
  const auto f = kalman_filter(sys, y);
  const auto s = rts_smoother(sys, f);
  CHECK(std::abs(s.marginals[0].mean(0) - f.filtered[1].mean(0)) < 1e-5);
}

TEST_CASE("backward information filter and two-filter combination") {
  const auto one_step = scalar_system(0, 1, {{1, 0, 0.5}}, {{1, 0, 1}, {1, 0, 2}});
  const Observations y{scalar(0.1), scalar(1.3)};
  const auto beta = backward_information_filter(one_step, y);
  CHECK(beta[1].precision.cwiseAbs().maxCoeff() == 0.0);
  CHECK(beta[1].constant == 0.0);
  for (double x : {-1.0, 0.0, 2.0}) {
    CHECK(beta[0](scalar(x)) == doctest::Approx(log_pdf(normal1(x, 2.5), scalar(1.3))).epsilon(1e-12));
  }

  Rng rng{22};
  for (int inst = 0; inst < 30; ++inst) {
    const Index d = 1 + inst % 2;
    const Index T = 1 + inst % 6;
    const auto sys = random_linear_system(rng, d, T);
    const auto yy = sample_observations(sys, rng);
    const auto kf = kalman_filter(sys, yy);
    const auto rts = rts_smoother(sys, kf);
    const auto tf = two_filter_combine(kf, backward_information_filter(sys, yy));
    for (Index t = 0; t <= T; ++t) {
      const auto i = static_cast<std::size_t>(t);
      CHECK(max_abs_diff(tf.marginals[i], rts.marginals[i]) < 1e-9);
      CHECK(std::abs(tf.log_normalizers[i] - kf.log_evidence) < 1e-9);
    }
    CHECK(max_abs_diff(tf.marginals.back(), kf.filtered.back()) < 1e-12);
  }
}

TEST_CASE("imm_filter reductions") {
  Rng rng{23};
  SUBCASE("single regime is the Kalman filter") {
    auto sys = random_jump_system(rng, 1, 2, 4);
    const auto y = sample_paths(sys, rng).y;
    const auto imm = imm_filter(sys, y);
    const std::vector<Index> path(5, 0);
    const auto kf = kalman_filter(sys.conditioned_on(path), y);
    CHECK(std::abs(imm.log_evidence - kf.log_evidence) < 1e-10);
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(imm.regime_probs[t].probs(0) == 1.0);
      CHECK(max_abs_diff(imm.moments[t], kf.filtered[t]) < 1e-10);
    }
  }
  SUBCASE("identical regimes follow the chain alone") {
    auto sys = random_jump_system(rng, 2, 1, 5);
    sys.state_init[1] = sys.state_init[0];
    sys.state_kernels[1] = sys.state_kernels[0];
    sys.obs_kernels[1] = sys.obs_kernels[0];
    const auto y = sample_paths(sys, rng).y;
    const auto imm = imm_filter(sys, y);
    Vector p = sys.chain_init.probs;
    for (std::size_t t = 0; t <= 5; ++t) {
      if (t > 0) p = sys.chain_kernel.matrix * p;
      CHECK((imm.regime_probs[t].probs - p).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("state mean lies within the exact mixture spread") {
    auto sys = random_jump_system(rng, 2, 1, 3);
    const auto y = sample_paths(sys, rng).y;
    const auto imm = imm_filter(sys, y);
    const BruteForceJgm bf(sys, y);
    for (Index t = 0; t <= 3; ++t) {
      const auto exact = bf.filtering_moments(t);
      const double spread = 3.0 * std::sqrt(exact.cov(0, 0));
      CHECK(std::abs(imm.moments[static_cast<std::size_t>(t)].mean(0) - exact.mean(0)) < spread);
    }
  }
}

TEST_CASE("brute force oracle") {
  Rng rng{24};
  SUBCASE("single regime equals the Kalman filter") {
    for (int inst = 0; inst < 10; ++inst) {
      const auto sys = random_jump_system(rng, 1, 1 + inst % 2, 1 + inst % 6);
      const auto y = sample_paths(sys, rng).y;
      const BruteForceJgm bf(sys, y);
      const std::vector<Index> path(static_cast<std::size_t>(sys.horizon + 1), 0);
      const auto lin = sys.conditioned_on(path);
      const auto kf = kalman_filter(lin, y);
      CHECK(std::abs(bf.log_evidence() - kf.log_evidence) < 1e-10);
      const auto rts = rts_smoother(lin, kf);
      const auto sm = bf.smoothing();
      for (std::size_t t = 0; t < path.size(); ++t) CHECK(max_abs_diff(sm.moments[t], rts.marginals[t]) < 1e-9);
    }
  }
  SUBCASE("path count") {
    const auto sys = random_jump_system(rng, 2, 1, 3);
    const BruteForceJgm bf(sys, sample_paths(sys, rng).y);
    CHECK(bf.paths() == 16);
    CHECK(BruteForceJgm::path_count(2, 3) == 16);
  }
  SUBCASE("evidence equals the sum over paths of per-path Kalman evidence") {
    const auto sys = random_jump_system(rng, 2, 1, 3);
    const auto y = sample_paths(sys, rng).y;
    const BruteForceJgm bf(sys, y);
    std::vector<double> terms;
    for (int code = 0; code < 16; ++code) {
      std::vector<Index> path;
      double log_prior = 0.0;
      for (int t = 0; t < 4; ++t) {
        path.push_back((code >> t) & 1);
        log_prior += t == 0 ? sys.chain_init.log_prob(path[0])
                            : std::log(sys.chain_kernel.matrix(path[static_cast<std::size_t>(t)], path[static_cast<std::size_t>(t - 1)]));
      }
      terms.push_back(log_prior + kalman_filter(sys.conditioned_on(path), y).log_evidence);
    }
    CHECK(std::abs(bf.log_evidence() - log_sum_exp(terms)) < 1e-10);
  }
  SUBCASE("pointwise filter density integrates to the evidence") {
    const auto sys = random_jump_system(rng, 2, 1, 4);
    const auto y = sample_paths(sys, rng).y;
    const BruteForceJgm bf(sys, y);
    for (Index t = 0; t <= 4; ++t) {
      const auto m = bf.filtering_moments(t);
      const double sd = std::sqrt(m.cov(0, 0));
      const double lo = m.mean(0) - 40.0 * sd - 20.0;
      const double hi = m.mean(0) + 40.0 * sd + 20.0;
      const int n = 200000;
      const double h = (hi - lo) / n;
      const double ref = bf.cumulative_log_evidence(t);
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const Vector x = scalar(lo + h * i);
        double v = 0.0;
        for (Index z = 0; z < 2; ++z) v += std::exp(bf.log_unnormalized_filter(t, x, z) - ref);
        acc += (i == 0 || i == n ? 0.5 : 1.0) * v;
      }
      CHECK(std::abs(acc * h - 1.0) < 1e-6);
      CHECK(std::abs(bf.filtering_regime_probs(t).probs.sum() - 1.0) < 1e-12);
    }
  }
  SUBCASE("enumeration cap") {
    const auto sys = random_jump_system(rng, 2, 1, 20);
    const auto y = sample_paths(sys, rng).y;
    try {
      BruteForceJgm bf(sys, y);
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("2097152") != std::string::npos);
    }
  }
}
