#include "verify.hpp"

#include "random_systems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vse {
namespace {

constexpr double kBoundSlack = 1e-9;
constexpr double kMonotoneSlack = 1e-9;
constexpr double kCollapseTol = 1e-8;
constexpr std::uint64_t kInstanceStream = 2;

class Check {
 public:
  explicit Check(std::string name) { result_.name = std::move(name); }

  // Records lhs <= rhs + slack.
  void at_most(double lhs, double rhs, double slack) {
    ++result_.evaluated;
    const double excess = lhs - rhs;
    if (!(excess <= slack)) {
      ++result_.failures;
      result_.worst_excess = std::max(result_.worst_excess, std::isnan(excess) ? INFINITY : excess);
    }
  }

  void close(double a, double b, double tol) {
    at_most(std::abs(a - b), 0.0, tol);
  }

  void close(const Matrix& a, const Matrix& b, double tol) {
    at_most((a - b).cwiseAbs().maxCoeff(), 0.0, tol);
  }

  void trace(const std::vector<double>& values) {
    for (std::size_t i = 1; i < values.size(); ++i) at_most(values[i - 1], values[i], kMonotoneSlack);
  }

  const CheckResult& result() const { return result_; }

 private:
  CheckResult result_;
};

void inflate(VjgmFilterResult& filter) {
  for (auto& step : filter.steps) {
    step.rep.log_kappa += 1.0;
    step.predictive.log_kappa_prev += 1.0;
    step.bound += 1.0;
  }
}

JumpGMSystem single_regime(const JumpGMSystem& sys) {
  JumpGMSystem one;
  one.chain_init = Categorical::uniform(1);
  one.chain_kernel = CategoricalKernel(Matrix::Ones(1, 1));
  one.state_init = {sys.state_init.front()};
  one.state_kernels = {sys.state_kernels.front()};
  one.obs_kernels = {sys.obs_kernels.front()};
  one.horizon = sys.horizon;
  return one;
}

}  // namespace

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

std::string VerifyReport::table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-34s %10s %9s %12s  %s\n", "check", "evaluated", "failures", "worst", "result");
  out += line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof(line), "%-34s %10zu %9zu %12.3e  %s\n", c.name.c_str(), c.evaluated, c.failures,
                  c.worst_excess, c.passed() ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

VerifyReport run_verify(const VerifyOptions& options) {
  if (options.max_T < 0) throw InputError("verify: max_T must be non-negative");
  if (options.max_M < 1) throw InputError("verify: max_M must be at least 1");
  const std::size_t paths = BruteForceJgm::path_count(options.max_M, options.max_T);
  if (paths > BruteForceJgm::kDefaultCap) {
    throw InputError("verify: max_M^(max_T+1) = " +
                     (paths == SIZE_MAX ? std::string("overflow") : std::to_string(paths)) +
                     " regime paths exceeds the enumeration cap of " + std::to_string(BruteForceJgm::kDefaultCap));
  }

  Check terminal("evidence bound (terminal)");
  Check per_time("evidence bound (per time)");
  Check collapsed_bound("collapsed filter evidence bound");
  Check pointwise("forward representer <= U_t");
  Check predictive("predictive representer <= U_t^p");
  Check monotone("ELBO monotonicity");
  Check collapse("single-regime reduction");

  for (std::size_t i = 0; i < options.instances; ++i) {
    Rng rng{options.seed, i, kInstanceStream};
    const Index M = options.max_M == 1
                        ? 1
                        : 2 + static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(options.max_M - 1));
    const Index T = static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(options.max_T + 1));
    const Index d = 1 + static_cast<Index>(rng.bits() % 2);
    const auto sys = random_jump_system(rng, M, d, T);
    const auto y = sample_paths(sys, rng).y;
    const BruteForceJgm oracle(sys, y);

    auto filter = suboptimal_filter(sys, y);
    auto collapsed = collapsed_filter(sys, y);
    const auto smoothed = fixed_point_smoother(sys, y, filter, options.smoother_iters);
    for (const auto& step : filter.steps) {
      monotone.trace(step.inner_trace);
      for (const auto& tr : step.filter_traces) monotone.trace(tr);
    }
    monotone.trace(smoothed.elbo_trace);

    double smoothed_elbo = smoothed.elbo;
    if (options.inject_violation) {
      inflate(filter);
      inflate(collapsed);
      smoothed_elbo += 1.0;
    }
    terminal.at_most(filter.log_evidence_bound(), oracle.log_evidence(), kBoundSlack);
    terminal.at_most(smoothed_elbo, oracle.log_evidence(), kBoundSlack);

    for (Index t = 0; t <= T; ++t) {
      const auto& step = filter.steps[static_cast<std::size_t>(t)];
      per_time.at_most(step.bound, oracle.cumulative_log_evidence(t), kBoundSlack);
      collapsed_bound.at_most(collapsed.steps[static_cast<std::size_t>(t)].bound,
                              oracle.cumulative_log_evidence(t), kBoundSlack);
      const auto& g = step.marginal.g;
      for (std::size_t k = 0; k < options.probes; ++k) {
        const Index z = static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(sys.regimes()));
        const Vector x = g.mean + 3.0 * rng.normal(d).cwiseProduct(g.cov.diagonal().cwiseSqrt());
        pointwise.at_most(step.rep(x, z), oracle.log_unnormalized_filter(t, x, z), kBoundSlack);
        predictive.at_most(step.predictive(x, z), oracle.log_unnormalized_predictive(t, x, z), kBoundSlack);
      }
    }

    const auto one = single_regime(sys);
    const std::vector<Index> path(static_cast<std::size_t>(T + 1), 0);
    const auto lin = one.conditioned_on(path);
    const auto kf = kalman_filter(lin, y);
    const auto rts = rts_smoother(lin, kf);
    const auto f1 = suboptimal_filter(one, y);
    const auto s1 = fixed_point_smoother(one, y, f1, 1);
    collapse.close(f1.log_evidence_bound(), kf.log_evidence, kCollapseTol);
    collapse.close(s1.elbo, kf.log_evidence, kCollapseTol);
    for (Index t = 0; t <= T; ++t) {
      const auto k = static_cast<std::size_t>(t);
      collapse.close(f1.steps[k].marginal.g.mean, kf.filtered[k].mean, kCollapseTol);
      collapse.close(f1.steps[k].marginal.g.cov, kf.filtered[k].cov, kCollapseTol);
      collapse.close(s1.marginals[k].g.mean, rts.marginals[k].mean, kCollapseTol);
      collapse.close(s1.marginals[k].g.cov, rts.marginals[k].cov, kCollapseTol);
    }
  }

  VerifyReport report;
  report.instances = options.instances;
  if (options.instances > 0) {
    for (const auto* c : {&terminal, &per_time, &collapsed_bound, &pointwise, &predictive, &monotone, &collapse}) {
      report.checks.push_back(c->result());
    }
  }
  return report;
}

}  // namespace vse
