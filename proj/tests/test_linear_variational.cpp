#include "linear_variational.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace vse;
using namespace vse::test;

namespace {

struct Instance {
  LinearGaussianSystem sys;
  Observations y;
  FilterResult kf;
  SmootherResult rts;
};

std::vector<Instance> instances(std::uint64_t seed, int count) {
  Rng rng{seed};
  std::vector<Instance> out;
  for (int i = 0; i < count; ++i) {
    Instance inst;
    inst.sys = random_linear_system(rng, 1 + i % 2, 1 + i % 5);
    inst.y = sample_observations(inst.sys, rng);
    inst.kf = kalman_filter(inst.sys, inst.y);
    inst.rts = rts_smoother(inst.sys, inst.kf);
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<Vector> probes(Rng& rng, Index d) {
  std::vector<Vector> out{Vector::Zero(d)};
  for (int i = 0; i < 4; ++i) out.push_back(2.0 * rng.normal(d));
  return out;
}

std::vector<GaussianDensity> prior_marginals(const LinearGaussianSystem& sys) {
  std::vector<GaussianDensity> out{sys.init};
  for (const auto& k : sys.transitions) out.push_back(k.push(out.back()));
  return out;
}

double kernel_diff(const AffineGaussianKernel& a, const AffineGaussianKernel& b) {
  return std::max({(a.slope - b.slope).cwiseAbs().maxCoeff(), (a.offset - b.offset).cwiseAbs().maxCoeff(),
                   (a.cov - b.cov).cwiseAbs().maxCoeff()});
}

}  // namespace

TEST_CASE("kernel_log_density_form matches the kernel density") {
  Rng rng{31};
  const auto k = random_kernel(rng, 2, 2);
  const auto form = kernel_log_density_form(k);
  for (int i = 0; i < 5; ++i) {
    const Vector out = rng.normal(2);
    const Vector in = rng.normal(2);
    Vector both(4);
    both << out, in;
    CHECK(std::abs(form(both) - direct_log_pdf(k.mean_at(in), k.cov, out)) < 1e-12);
  }
}

TEST_CASE("forward sweep with optimal kernels reproduces the Kalman filter") {
  Rng rng{32};
  for (const auto& inst : instances(33, 20)) {
    const auto sweep = forward_representer_sweep(inst.sys, inst.y, inst.rts.marginals);
    const Index T = inst.sys.horizon();
    for (Index t = 0; t <= T; ++t) {
      const auto i = static_cast<std::size_t>(t);
      for (const auto& x : probes(rng, inst.sys.state_dim())) {
        const double exact = inst.kf.cumulative_log_evidence(t) + log_pdf(inst.kf.filtered[i], x);
        CHECK(std::abs(sweep.rho[i](x) - exact) < 1e-8);
        if (t > 0) {
          const double pred = inst.kf.cumulative_log_evidence(t - 1) + log_pdf(inst.kf.predicted[i], x);
          CHECK(std::abs(sweep.rho_pred[i](x) - pred) < 1e-8);
        }
      }
    }
    for (Index t = 1; t <= T; ++t) {
      const auto i = static_cast<std::size_t>(t - 1);
      CHECK(kernel_diff(sweep.reverse_kernels[i], inst.rts.reverse_kernels[i]) < 1e-9);
    }
  }
}

TEST_CASE("optimal forward representers do not depend on the marginals") {
  for (const auto& inst : instances(34, 10)) {
    const auto a = forward_representer_sweep(inst.sys, inst.y, inst.rts.marginals);
    const auto b = forward_representer_sweep(inst.sys, inst.y, prior_marginals(inst.sys));
    for (std::size_t t = 0; t < a.rho.size(); ++t) {
      CHECK((a.rho[t].precision - b.rho[t].precision).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((a.rho[t].linear - b.rho[t].linear).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(a.rho[t].constant - b.rho[t].constant) < 1e-10);
    }
  }
}

TEST_CASE("perturbed reverse kernels lower the representer pointwise") {
  Rng rng{35};
  for (const auto& inst : instances(36, 15)) {
    auto perturbed = inst.rts.reverse_kernels;
    for (auto& k : perturbed) k.offset.array() += 0.5;
    const auto exact = forward_representer_sweep(inst.sys, inst.y, inst.rts.marginals);
    const auto loose = forward_representer_sweep_with_kernels(inst.sys, inst.y, perturbed, inst.rts.marginals);
    for (std::size_t t = 1; t < exact.rho.size(); ++t) {
      for (const auto& x : probes(rng, inst.sys.state_dim())) {
        CHECK(loose.rho[t](x) < exact.rho[t](x));
      }
    }
    CHECK(loose.values.back() < exact.values.back());
  }
}

TEST_CASE("backward sweep with optimal kernels reproduces the information filter") {
  Rng rng{37};
  for (const auto& inst : instances(38, 20)) {
    const auto sweep = backward_representer_sweep(inst.sys, inst.y, inst.rts.marginals);
    const auto info = backward_information_filter(inst.sys, inst.y);
    for (std::size_t t = 0; t < info.size(); ++t) {
      for (const auto& x : probes(rng, inst.sys.state_dim())) CHECK(std::abs(sweep.beta[t](x) - info[t](x)) < 1e-8);
    }
    CHECK(std::abs(sweep.log_evidence_bound - inst.kf.log_evidence) < 1e-9);
    CHECK(max_abs_diff(sweep.initial, inst.rts.marginals.front()) < 1e-9);
  }
}

TEST_CASE("variational two-filter combination equals the RTS marginals") {
  for (const auto& inst : instances(39, 20)) {
    const auto fwd = forward_representer_sweep(inst.sys, inst.y, inst.rts.marginals);
    const auto bwd = backward_representer_sweep(inst.sys, inst.y, inst.rts.marginals);
    for (Index t = 0; t <= inst.sys.horizon(); ++t) {
      CHECK(max_abs_diff(variational_two_filter(fwd, bwd, t), inst.rts.marginals[static_cast<std::size_t>(t)]) < 1e-9);
    }
  }
}

TEST_CASE("fixed-point smoothers reach the exact posterior in one iteration") {
  for (const auto& inst : instances(40, 20)) {
    const auto init = prior_marginals(inst.sys);
    const auto fwd = fixed_point_smoother(inst.sys, inst.y, init, 1);
    const auto bwd = backward_fixed_point_smoother(inst.sys, inst.y, init, 1);
    REQUIRE(fwd.elbo_trace.size() == 1);
    CHECK(std::abs(fwd.elbo_trace.back() - inst.kf.log_evidence) < 1e-9);
    CHECK(std::abs(bwd.elbo_trace.back() - inst.kf.log_evidence) < 1e-9);
    for (std::size_t t = 0; t < init.size(); ++t) {
      CHECK(max_abs_diff(fwd.posterior.marginals[t], inst.rts.marginals[t]) < 1e-9);
      CHECK(max_abs_diff(bwd.posterior.marginals[t], inst.rts.marginals[t]) < 1e-9);
    }
    const auto more = fixed_point_smoother(inst.sys, inst.y, init, 3);
    for (double v : more.elbo_trace) CHECK(std::abs(v - inst.kf.log_evidence) < 1e-9);
  }
  Instance bad = instances(41, 1).front();
  CHECK_THROWS_AS(fixed_point_smoother(bad.sys, bad.y, prior_marginals(bad.sys), 0), InputError);
}

TEST_CASE("linear_elbo") {
  for (const auto& inst : instances(42, 15)) {
    const auto exact = GaussMarkovPosterior::from_reverse(inst.rts.marginals.back(), inst.rts.reverse_kernels);
    CHECK(std::abs(linear_elbo(exact, inst.sys, inst.y) - inst.kf.log_evidence) < 1e-9);
    auto kernels = inst.rts.reverse_kernels;
    for (auto& k : kernels) k.offset.array() += 0.5;
    const auto loose = GaussMarkovPosterior::from_reverse(inst.rts.marginals.back(), kernels);
    CHECK(linear_elbo(loose, inst.sys, inst.y) < inst.kf.log_evidence - 1e-6);
  }
}

TEST_CASE("from_reverse and from_forward describe the same chain") {
  for (const auto& inst : instances(43, 10)) {
    const auto rev = GaussMarkovPosterior::from_reverse(inst.rts.marginals.back(), inst.rts.reverse_kernels);
    const auto fwd = GaussMarkovPosterior::from_forward(rev.marginals.front(), rev.forward_kernels);
    for (std::size_t t = 0; t < rev.marginals.size(); ++t) {
      CHECK(max_abs_diff(rev.marginals[t], inst.rts.marginals[t]) < 1e-9);
      CHECK(max_abs_diff(fwd.marginals[t], rev.marginals[t]) < 1e-9);
    }
  }
}

TEST_CASE("collapsed linear filter equals the Kalman filter") {
  for (const auto& inst : instances(44, 20)) {
    const auto reps = courts_filter(inst.sys, inst.y);
    REQUIRE(reps.size() == inst.kf.filtered.size());
    for (std::size_t t = 0; t < reps.size(); ++t) {
      CHECK(std::abs(reps[t].log_kappa - inst.kf.cumulative_log_evidence(static_cast<Index>(t))) < 1e-9);
      CHECK(max_abs_diff(reps[t].density, inst.kf.filtered[t]) < 1e-9);
    }
  }
}
