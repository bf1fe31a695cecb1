// Exact Bayesian baselines: Kalman filter, RTS smoother, backward information
// filter, two-filter smoothing, the IMM filter and an enumeration oracle for
// jump Gauss-Markov systems.
#ifndef VSE_EXACT_INFERENCE_HPP
#define VSE_EXACT_INFERENCE_HPP

#include "gaussian.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace vse {

using Observations = std::vector<Vector>;

// x_0 ~ init, x_t | x_{t-1} ~ transitions[t-1], y_t | x_t ~ observations[t].
struct LinearGaussianSystem {
  GaussianDensity init;
  std::vector<AffineGaussianKernel> transitions;
  std::vector<AffineGaussianKernel> observations;

  Index horizon() const { return static_cast<Index>(transitions.size()); }
  Index state_dim() const { return init.dim(); }
  void validate() const;
  void validate(const Observations& y) const;
};

struct FilterResult {
  std::vector<GaussianDensity> predicted;  // predicted[0] is the initial density
  std::vector<GaussianDensity> filtered;
  std::vector<double> log_evidence_increments;
  double log_evidence = 0.0;

  // log h_{0:t}
  double cumulative_log_evidence(Index t) const;
};

FilterResult kalman_filter(const LinearGaussianSystem& sys, const Observations& y);

// One measurement update: returns the posterior and log N(y; C m + d, S).
struct MeasurementUpdate {
  GaussianDensity posterior;
  double log_likelihood = 0.0;
};
MeasurementUpdate kalman_update(const GaussianDensity& prior, const AffineGaussianKernel& obs,
                                const Vector& y);

struct SmootherResult {
  std::vector<GaussianDensity> marginals;
  // reverse_kernels[t-1] is the conditional of x_{t-1} given x_t.
  std::vector<AffineGaussianKernel> reverse_kernels;
};

SmootherResult rts_smoother(const LinearGaussianSystem& sys, const FilterResult& filter);

// log of x -> int exp(l(x')) kernel(x' | x) dx' as a form in x. Throws
// NumericError when the result is not integrable.
LogQuadraticForm pull_back(const LogQuadraticForm& l, const AffineGaussianKernel& kernel);

// log h_{t+1:T|t} for t = 0..T; the last entry is the zero form.
std::vector<LogQuadraticForm> backward_information_filter(const LinearGaussianSystem& sys,
                                                          const Observations& y);

struct TwoFilterResult {
  std::vector<GaussianDensity> marginals;
  // log of the integral of h_{t+1:T|t} U_t^{0:t}; constant in t.
  std::vector<double> log_normalizers;
};

TwoFilterResult two_filter_combine(const FilterResult& forward,
                                   const std::vector<LogQuadraticForm>& backward);

// Regime chain z_t with kernels indexed the following way: the state kernel is
// selected by the previous regime z_{t-1}, the observation kernel by z_t.
struct JumpGMSystem {
  Categorical chain_init;
  CategoricalKernel chain_kernel;
  std::vector<GaussianDensity> state_init;
  std::vector<AffineGaussianKernel> state_kernels;
  std::vector<AffineGaussianKernel> obs_kernels;
  Index horizon = 0;

  Index regimes() const { return chain_init.size(); }
  Index state_dim() const { return state_init.front().dim(); }
  void validate() const;
  void validate(const Observations& y) const;

  // The linear-Gaussian system obtained by fixing the regime path z_{0:T}.
  LinearGaussianSystem conditioned_on(std::span<const Index> path) const;
};

struct MixtureFilterResult {
  std::vector<Categorical> regime_probs;
  std::vector<std::vector<GaussianDensity>> components;  // [t][regime]
  std::vector<GaussianDensity> moments;                  // moment-matched mixture
  std::vector<double> log_evidence_increments;
  double log_evidence = 0.0;
};

GaussianDensity moment_match(std::span<const GaussianDensity> components, const Categorical& weights);

MixtureFilterResult imm_filter(const JumpGMSystem& sys, const Observations& y);

// Exhaustive enumeration over all M^(T+1) regime paths, one Kalman filter per
// path prefix.
class BruteForceJgm {
 public:
  static constexpr std::size_t kDefaultCap = std::size_t{1} << 20;

  BruteForceJgm(const JumpGMSystem& sys, const Observations& y, std::size_t cap = kDefaultCap);

  // M^(T+1), or SIZE_MAX on overflow.
  static std::size_t path_count(Index regimes, Index horizon);

  double log_evidence() const { return cumulative_.back(); }
  double cumulative_log_evidence(Index t) const { return cumulative_.at(static_cast<std::size_t>(t)); }
  std::size_t paths() const { return levels_.back().size(); }

  // log U_t^{0:t}(x, z): joint unnormalized filtering density of (x_t, z_t).
  double log_unnormalized_filter(Index t, const Vector& x, Index z) const;
  // log U_t^{0:t-1}(x, z): the same before y_t is seen.
  double log_unnormalized_predictive(Index t, const Vector& x, Index z) const;

  Categorical filtering_regime_probs(Index t) const;
  GaussianDensity filtering_moments(Index t) const;

  struct Smoothing {
    std::vector<Categorical> regime_probs;
    std::vector<GaussianDensity> moments;
  };
  Smoothing smoothing() const;

 private:
  struct Node {
    std::size_t parent = 0;
    Index regime = 0;
    double log_prior_weight = 0.0;  // path probability times evidence before y_t
    double log_weight = 0.0;        // after y_t
    GaussianDensity predicted;
    GaussianDensity filtered;
  };

  JumpGMSystem sys_;
  std::vector<std::vector<Node>> levels_;
  std::vector<double> cumulative_;
};

}  // namespace vse

#endif  // VSE_EXACT_INFERENCE_HPP
