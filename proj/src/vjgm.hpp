// Variational solver for jump Gauss-Markov systems under the factored family
// q(x, z) = f(z) g(x): forward representers, the filter fixed point, the
// reverse-kernel fixed points, the sub-optimal filter VJGM(0), the collapsed
// filter and the fixed-point smoother VJGM(k).
#ifndef VSE_VJGM_HPP
#define VSE_VJGM_HPP

#include "exact_inference.hpp"

#include <vector>

namespace vse {

// log rho_t(x, z) = log_kappa + log f_star(z) + log g_star[z](x)
struct ForwardRepresenter {
  double log_kappa = 0.0;
  Categorical f_star;
  std::vector<GaussianDensity> g_star;

  Index regimes() const { return f_star.size(); }
  double operator()(const Vector& x, Index z) const;
};

// q_t(x, z) = f(z) g(x)
struct ProductMarginal {
  Categorical f;
  GaussianDensity g;
};

// Reverse-time kernel f_rev(z_{t-1} | z_t) g_rev(x_{t-1} | x_t). Column z_t of
// f_rev is the distribution of z_{t-1}.
struct ReverseKernelPair {
  CategoricalKernel f_rev;
  AffineGaussianKernel g_rev;
};

struct ChainPrediction {
  Categorical f_pred;
  CategoricalKernel f_rev_dagger;
};

// lambda(i | j) f*(j) = f_pred(i) f_rev_dagger(j | i). A destination with zero
// predicted mass gets a uniform reverse column.
ChainPrediction chain_predict(const Categorical& f_prev_star, const CategoricalKernel& kernel);

struct RegimePrediction {
  std::vector<GaussianDensity> pred;      // g~p_t(. | z_{t-1})
  std::vector<AffineGaussianKernel> rev;  // g~_{t-1|t}(. | ., z_{t-1})
};

// Per-regime predict_and_reverse of g*_{t-1}(. | z) through the state kernel of z.
RegimePrediction joint_predict_reverse(const std::vector<GaussianDensity>& g_star_prev,
                                       const std::vector<AffineGaussianKernel>& state_kernels);

// log(eta g_dagger_rev g_pred) = sum_j f_rev(j | z_t) log(g~p_j g~rev_j), over (x_{t-1}, x_t).
struct MixedJoint {
  double log_eta = 0.0;
  AffineGaussianKernel g_dagger_rev;
  GaussianDensity g_pred;
};

MixedJoint mix_joint(const RegimePrediction& tilde, const CategoricalKernel& f_rev, Index z_t);

// log zeta_dagger(z_t) = sum_j f_rev(j | z_t) log(f_dagger(j | z_t) / f_rev(j | z_t)).
// An entry is -inf (and support_violation is set) when f_rev puts mass where
// f_dagger has none.
struct ZetaDagger {
  Vector log_zeta;
  bool support_violation = false;
};

ZetaDagger zeta_dagger(const CategoricalKernel& f_rev, const CategoricalKernel& f_rev_dagger);

// int log(g_dagger_rev / g_rev) g_rev dx_{t-1} == log_eta_dagger + log_h(x_t),
// where log_h(x) = -0.5 (y - H x)' S^-1 (y - H x) vanishes when the kernels agree.
struct HDagger {
  double log_eta_dagger = 0.0;
  ConditionalLikelihood likelihood;  // y = b_rev - b_dagger, H = A_dagger - A_rev, S = Q_dagger
  LogQuadraticForm log_h;
};

HDagger h_dagger(const AffineGaussianKernel& g_dagger_rev, const AffineGaussianKernel& g_rev);

// Quantities that depend only on rho_{t-1} and the model.
struct StepContext {
  Index t = 0;
  ChainPrediction chain;
  RegimePrediction tilde;
};

StepContext prepare_step(const ForwardRepresenter& prev, const JumpGMSystem& sys, Index t);

// log rho_t^p(x, z) = log_kappa_prev + log_weight(z) + log_h_dagger[z](x) + log g_pred[z](x)
struct PredictiveRepresenter {
  double log_kappa_prev = 0.0;
  Vector log_weight;  // log(eta_dagger zeta_dagger eta f_pred)
  std::vector<GaussianDensity> g_pred;
  std::vector<LogQuadraticForm> log_h_dagger;
  bool support_violation = false;

  double operator()(const Vector& x, Index z) const;
};

PredictiveRepresenter predictive_representer(const StepContext& ctx, const ReverseKernelPair& rev,
                                             double log_kappa_prev);

// Adds the observation y_t to a predictive representer.
ForwardRepresenter value_update(const PredictiveRepresenter& pred, const JumpGMSystem& sys,
                                const Vector& y_t, Index t);

// Convenience form: prepare_step + predictive_representer + value_update.
ForwardRepresenter value_update(const ForwardRepresenter& prev, const JumpGMSystem& sys,
                                const Vector& y_t, const ReverseKernelPair& rev, Index t);

// rho_0 = U_0^0 and its predictive counterpart lambda_0(z) rho_0(x | z).
ForwardRepresenter initial_representer(const JumpGMSystem& sys, const Vector& y0);
PredictiveRepresenter initial_predictive(const JumpGMSystem& sys);

// int log(rho / q) dq for q = f g.
double marginal_objective(const ForwardRepresenter& rep, const ProductMarginal& q);

struct FilterUpdate {
  ProductMarginal marginal;
  double bound = 0.0;
  std::vector<double> trace;  // bound after every coordinate-ascent pass
  int iterations = 0;
  bool converged = false;
};

// Coordinate ascent on int log(rho / q) dq: g given f (precision averaging),
// then f given g (f proportional to xi f*). Starts from `warm` when given,
// otherwise from f = f*.
FilterUpdate filter_update(const ForwardRepresenter& rep, int max_iters, double tol,
                           const ProductMarginal* warm = nullptr);

// f_rev = f_dagger with g_rev averaged under the weights f*_{t-1}.
ReverseKernelPair initial_reverse_kernels(const StepContext& ctx);

// One joint pass of the reverse-kernel fixed point against the marginal q_t:
// zeta_{t-1} with the current g_rev, then f_rev, then g_rev.
ReverseKernelPair reverse_kernel_update(const StepContext& ctx, const ProductMarginal& current,
                                        const ReverseKernelPair& rev);

// log zeta_{t-1}(z_{t-1}) for the given g_rev and marginal g_t.
Vector log_zeta_prev(const StepContext& ctx, const GaussianDensity& g_t,
                     const AffineGaussianKernel& g_rev);

struct VjgmOptions {
  int inner_max_iters = 25;
  double inner_tol = 1e-9;
  int filter_max_iters = 100;
  double filter_tol = 1e-13;
  int kernel_max_iters = 50;
  double kernel_tol = 1e-12;
};

struct FilterStep {
  ForwardRepresenter rep;
  PredictiveRepresenter predictive;
  ProductMarginal marginal;
  ReverseKernelPair reverse;  // unset at t = 0
  double bound = 0.0;
  std::vector<double> inner_trace;  // bound after each inner pass
  std::vector<std::vector<double>> filter_traces;
  bool converged = true;
};

struct VjgmFilterResult {
  std::vector<FilterStep> steps;
  double log_evidence_bound() const { return steps.back().bound; }
};

// VJGM(0).
VjgmFilterResult suboptimal_filter(const JumpGMSystem& sys, const Observations& y,
                                   const VjgmOptions& options = {});

// VJGM(0) with every representer replaced by kappa_hat q_t after its step.
VjgmFilterResult collapsed_filter(const JumpGMSystem& sys, const Observations& y,
                                  const VjgmOptions& options = {});

struct VjgmPosterior {
  std::vector<ProductMarginal> marginals;
  std::vector<ReverseKernelPair> reverse_kernels;  // [t-1] maps time t to t-1
  std::vector<ForwardRepresenter> representers;
  double elbo = 0.0;
  std::vector<double> elbo_trace;
};

// f_{t-1} = f_rev f_t, g_{t-1} = push of g_t through g_rev.
std::vector<ProductMarginal> backward_marginals(const ProductMarginal& terminal,
                                                const std::vector<ReverseKernelPair>& reverse);

VjgmPosterior posterior_from_filter(const VjgmFilterResult& filter);

// VJGM(k): `iters` outer iterations started from the filter posterior.
VjgmPosterior fixed_point_smoother(const JumpGMSystem& sys, const Observations& y,
                                   const VjgmFilterResult& init, int iters,
                                   const VjgmOptions& options = {});

// Evidence lower bound of the posterior's reverse factorization, recomputed
// from its reverse kernels and terminal marginal.
double elbo(const VjgmPosterior& posterior, const JumpGMSystem& sys, const Observations& y);

}  // namespace vse

#endif  // VSE_VJGM_HPP
