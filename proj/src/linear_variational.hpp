// Value-functional recursions on the linear-Gaussian family, where the family
// is rich enough to contain the exact posterior. Every quantity here has an
// exact counterpart in exact_inference, which makes this module the reference
// point for the jump-system solver.
#ifndef VSE_LINEAR_VARIATIONAL_HPP
#define VSE_LINEAR_VARIATIONAL_HPP

#include "exact_inference.hpp"

#include <vector>

namespace vse {

// log kernel(x_out | x_in) as a form over the stacked vector [x_out; x_in].
LogQuadraticForm kernel_log_density_form(const AffineGaussianKernel& kernel);

// log U_0^0 = log init + log h(y_0 | .)
LogQuadraticForm initial_forward_representer(const LinearGaussianSystem& sys, const Observations& y);

// Predictive representer for an arbitrary reverse kernel q(x' | x):
//   x -> E_q[log transition(x | x') + rho_prev(x') - log q(x' | x)]
LogQuadraticForm forward_predictive_update(const LogQuadraticForm& rho_prev,
                                           const AffineGaussianKernel& transition,
                                           const AffineGaussianKernel& reverse);

// The reverse kernel maximizing the predictive representer pointwise: the
// Bayes reverse conditional of the normalized rho_prev.
AffineGaussianKernel optimal_reverse_kernel(const LogQuadraticForm& rho_prev,
                                            const AffineGaussianKernel& transition);

struct ForwardSweep {
  std::vector<LogQuadraticForm> rho;       // log rho_t
  std::vector<LogQuadraticForm> rho_pred;  // log rho_t^p; entry 0 is the initial density
  std::vector<AffineGaussianKernel> reverse_kernels;  // [t-1] is q_{t-1|t}
  std::vector<double> values;                         // int log rho_t dq_t
};

ForwardSweep forward_representer_sweep(const LinearGaussianSystem& sys, const Observations& y,
                                       const std::vector<GaussianDensity>& marginals);

// Same recursion with the reverse kernels held fixed instead of optimized.
ForwardSweep forward_representer_sweep_with_kernels(const LinearGaussianSystem& sys,
                                                    const Observations& y,
                                                    const std::vector<AffineGaussianKernel>& reverse,
                                                    const std::vector<GaussianDensity>& marginals);

// Backward representer for an arbitrary forward kernel q(x' | x), with
// l = beta_t + log h(y_t | .):
//   x -> E_q[l(x') + log transition(x' | x) - log q(x' | x)]
LogQuadraticForm backward_update(const LogQuadraticForm& l, const AffineGaussianKernel& transition,
                                 const AffineGaussianKernel& forward);

AffineGaussianKernel optimal_forward_kernel(const LogQuadraticForm& l,
                                            const AffineGaussianKernel& transition);

struct BackwardSweep {
  std::vector<LogQuadraticForm> beta;                 // log beta_t; last entry is zero
  std::vector<AffineGaussianKernel> forward_kernels;  // [t-1] is q_{t|t-1}
  GaussianDensity initial;                            // argmax of int log(beta_0 U_0^0 / q_0) dq_0
  double log_evidence_bound = 0.0;                    // the corresponding maximum
  std::vector<double> values;                         // int log beta_t dq_t
};

BackwardSweep backward_representer_sweep(const LinearGaussianSystem& sys, const Observations& y,
                                         const std::vector<GaussianDensity>& marginals);

BackwardSweep backward_representer_sweep_with_kernels(
    const LinearGaussianSystem& sys, const Observations& y,
    const std::vector<AffineGaussianKernel>& forward, const std::vector<GaussianDensity>& marginals);

// Maximizer of int log(rho_t beta_t / q) dq over Gaussians q.
GaussianDensity variational_two_filter(const ForwardSweep& forward, const BackwardSweep& backward,
                                       Index t);

struct GaussMarkovPosterior {
  std::vector<GaussianDensity> marginals;
  std::vector<AffineGaussianKernel> forward_kernels;  // [t-1] is q_{t|t-1}
  std::vector<AffineGaussianKernel> reverse_kernels;  // [t-1] is q_{t-1|t}

  static GaussMarkovPosterior from_reverse(const GaussianDensity& terminal,
                                           const std::vector<AffineGaussianKernel>& reverse);
  static GaussMarkovPosterior from_forward(const GaussianDensity& initial,
                                           const std::vector<AffineGaussianKernel>& forward);
};

struct LinearSmootherResult {
  GaussMarkovPosterior posterior;
  std::vector<double> elbo_trace;
};

// Alternates forward representer sweeps with backward marginal passes.
LinearSmootherResult fixed_point_smoother(const LinearGaussianSystem& sys, const Observations& y,
                                          const std::vector<GaussianDensity>& init_marginals,
                                          int iters);

// Mirror image: backward representer sweeps with forward marginal passes.
LinearSmootherResult backward_fixed_point_smoother(const LinearGaussianSystem& sys,
                                                   const Observations& y,
                                                   const std::vector<GaussianDensity>& init_marginals,
                                                   int iters);

// int log(U_{0:T} / q_{0:T}) dq_{0:T} for the reverse factorization of the posterior.
double linear_elbo(const GaussMarkovPosterior& posterior, const LinearGaussianSystem& sys,
                   const Observations& y);

// A forward representer collapsed to log_kappa + log density.
struct CollapsedRepresenter {
  double log_kappa = 0.0;
  GaussianDensity density;
};

CollapsedRepresenter courts_initial(const LinearGaussianSystem& sys, const Observations& y);
CollapsedRepresenter courts_collapse_step(const CollapsedRepresenter& prev,
                                          const LinearGaussianSystem& sys, const Observations& y,
                                          Index t);
std::vector<CollapsedRepresenter> courts_filter(const LinearGaussianSystem& sys, const Observations& y);

}  // namespace vse

#endif  // VSE_LINEAR_VARIATIONAL_HPP
