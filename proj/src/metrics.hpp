// Per-trial accuracy and calibration metrics of a state estimate against the
// simulated truth.
#ifndef VSE_METRICS_HPP
#define VSE_METRICS_HPP

#include "random_systems.hpp"
#include "vjgm.hpp"

#include <vector>

namespace vse {

inline constexpr double kProbabilityFloor = 1e-12;

struct TrialMetrics {
  double rmse_x = 0.0;
  double accuracy_z = 0.0;   // fraction of t with argmax f_t == z_t
  double log_odds_z = 0.0;   // mean of log(max(p, eps)) - log(max(1 - p, eps))
  double chi2 = 0.0;
};

double clamped_log_odds(double p);

// chi2 = sum_t (x_t - m_t)' P_t^-1 (x_t - m_t)
TrialMetrics filtering_metrics(const JumpPaths& truth, const std::vector<Categorical>& f,
                               const std::vector<GaussianDensity>& g);

// chi2 of the whole path under the reverse-Markov factorization:
// terminal residual plus one reverse-kernel residual per step.
TrialMetrics smoothing_metrics(const JumpPaths& truth, const VjgmPosterior& posterior);

}  // namespace vse

#endif  // VSE_METRICS_HPP
