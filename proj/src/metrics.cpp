#include "metrics.hpp"

#include <algorithm>
#include <cmath>

namespace vse {
namespace {

double mahalanobis(const Vector& r, const Matrix& cov) {
  const auto llt = cholesky(cov, "metric covariance");
  return r.dot(llt.solve(r));
}

void fill_common(TrialMetrics& m, const JumpPaths& truth, const std::vector<Categorical>& f,
                 const std::vector<Vector>& means) {
  const double n = static_cast<double>(truth.x.size());
  double se = 0.0;
  double hits = 0.0;
  double odds = 0.0;
  for (std::size_t t = 0; t < truth.x.size(); ++t) {
    se += (truth.x[t] - means[t]).squaredNorm();
    hits += f[t].argmax() == truth.z[t] ? 1.0 : 0.0;
    odds += clamped_log_odds(f[t].probs(truth.z[t]));
  }
  m.rmse_x = std::sqrt(se / n);
  m.accuracy_z = hits / n;
  m.log_odds_z = odds / n;
}

void check_lengths(const JumpPaths& truth, std::size_t n) {
  if (truth.x.empty() || truth.x.size() != n || truth.z.size() != n) {
    throw InputError("metrics: estimate and truth lengths differ");
  }
}

}  // namespace

double clamped_log_odds(double p) {
  return std::log(std::max(p, kProbabilityFloor)) - std::log(std::max(1.0 - p, kProbabilityFloor));
}

TrialMetrics filtering_metrics(const JumpPaths& truth, const std::vector<Categorical>& f,
                               const std::vector<GaussianDensity>& g) {
  check_lengths(truth, f.size());
  check_lengths(truth, g.size());
  TrialMetrics m;
  std::vector<Vector> means;
  for (std::size_t t = 0; t < g.size(); ++t) {
    means.push_back(g[t].mean);
    m.chi2 += mahalanobis(truth.x[t] - g[t].mean, g[t].cov);
  }
  fill_common(m, truth, f, means);
  return m;
}

TrialMetrics smoothing_metrics(const JumpPaths& truth, const VjgmPosterior& posterior) {
  const auto& q = posterior.marginals;
  check_lengths(truth, q.size());
  if (posterior.reverse_kernels.size() + 1 != q.size()) {
    throw InputError("metrics: posterior needs one reverse kernel per step");
  }
  TrialMetrics m;
  std::vector<Categorical> f;
  std::vector<Vector> means;
  for (const auto& qt : q) {
    f.push_back(qt.f);
    means.push_back(qt.g.mean);
  }
  const std::size_t T = q.size() - 1;
  m.chi2 = mahalanobis(truth.x[T] - q[T].g.mean, q[T].g.cov);
  for (std::size_t t = 1; t <= T; ++t) {
    const auto& k = posterior.reverse_kernels[t - 1].g_rev;
    m.chi2 += mahalanobis(truth.x[t - 1] - k.mean_at(truth.x[t]), k.cov);
  }
  fill_common(m, truth, f, means);
  return m;
}

}  // namespace vse
