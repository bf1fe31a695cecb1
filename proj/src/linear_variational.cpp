#include "linear_variational.hpp"

#include <cmath>
#include <string>

namespace vse {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// -E[log N(x'; mean, cov)] for x' drawn from that same Gaussian.
double kernel_entropy(const AffineGaussianKernel& k) {
  const auto llt = cholesky(k.cov, "kernel covariance");
  return 0.5 * (static_cast<double>(k.out_dim()) * (1.0 + kLog2Pi) + log_det(llt));
}

Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Vector stack(const Vector& top, const Vector& bottom) {
  Vector out(top.size() + bottom.size());
  out << top, bottom;
  return out;
}

// Reorders a joint over [a; b] (a has lead_dim coordinates) into [b; a].
GaussianDensity swap_blocks(const GaussianDensity& joint, Index lead_dim) {
  const Index n = joint.dim();
  const Index trail = n - lead_dim;
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
  for (Index i = 0; i < trail; ++i) perm.indices()(lead_dim + i) = static_cast<int>(i);
  for (Index i = 0; i < lead_dim; ++i) perm.indices()(i) = static_cast<int>(trail + i);
  return GaussianDensity(perm * joint.mean, symmetrized(perm * joint.cov * perm.transpose()));
}

void check_lengths(const LinearGaussianSystem& sys, std::size_t marginals) {
  if (static_cast<Index>(marginals) != sys.horizon() + 1) {
    throw InputError("expected " + std::to_string(sys.horizon() + 1) + " marginals, got " +
                     std::to_string(marginals));
  }
}

}  // namespace

LogQuadraticForm kernel_log_density_form(const AffineGaussianKernel& kernel) {
  const Index n_out = kernel.out_dim();
  const Index n_in = kernel.in_dim();
  const auto llt = cholesky(kernel.cov, "kernel covariance");
  Matrix m(n_out, n_out + n_in);
  m << Matrix::Identity(n_out, n_out), -kernel.slope;
  const Matrix q_inv_m = llt.solve(m);
  const Vector q_inv_o = llt.solve(kernel.offset);
  const double c = -0.5 * (kernel.offset.dot(q_inv_o) + static_cast<double>(n_out) * kLog2Pi +
                           log_det(llt));
  return LogQuadraticForm(symmetrized(m.transpose() * q_inv_m), m.transpose() * q_inv_o, c);
}

LogQuadraticForm initial_forward_representer(const LinearGaussianSystem& sys, const Observations& y) {
  return LogQuadraticForm::from_log_pdf(sys.init) +
         LogQuadraticForm::likelihood(sys.observations.front(), y.front());
}

LogQuadraticForm forward_predictive_update(const LogQuadraticForm& rho_prev,
                                           const AffineGaussianKernel& transition,
                                           const AffineGaussianKernel& reverse) {
  const Index d = transition.out_dim();
  const auto from_prev = expect_affine(rho_prev, reverse.slope, reverse.offset, reverse.cov);
  // x' = G x + c + e enters the transition density through [x; x'].
  const Matrix b = stack(Matrix::Identity(d, d), reverse.slope);
  const Vector o = stack(Vector::Zero(d), reverse.offset);
  const auto from_transition = expect_affine(kernel_log_density_form(transition), b, o,
                                             block_diag(Matrix::Zero(d, d), reverse.cov));
  return (from_prev + from_transition).shifted(kernel_entropy(reverse));
}

AffineGaussianKernel optimal_reverse_kernel(const LogQuadraticForm& rho_prev,
                                            const AffineGaussianKernel& transition) {
  return predict_and_reverse_unguarded(normalize(rho_prev).posterior, transition).reverse;
}

ForwardSweep forward_representer_sweep(const LinearGaussianSystem& sys, const Observations& y,
                                       const std::vector<GaussianDensity>& marginals) {
  sys.validate(y);
  check_lengths(sys, marginals.size());
  ForwardSweep out;
  out.rho.push_back(initial_forward_representer(sys, y));
  out.rho_pred.push_back(LogQuadraticForm::from_log_pdf(sys.init));
  for (Index t = 1; t <= sys.horizon(); ++t) {
    try {
      auto rev = optimal_reverse_kernel(out.rho.back(), sys.transitions[t - 1]);
      auto pred = forward_predictive_update(out.rho.back(), sys.transitions[t - 1], rev);
      out.rho.push_back(pred + LogQuadraticForm::likelihood(sys.observations[t], y[t]));
      out.rho_pred.push_back(std::move(pred));
      out.reverse_kernels.push_back(std::move(rev));
    } catch (const NumericError& e) {
      throw NumericError("time " + std::to_string(t) + ": " + e.what());
    }
  }
  for (std::size_t t = 0; t < marginals.size(); ++t) {
    out.values.push_back(expectation(out.rho[t], marginals[t]));
  }
  return out;
}

ForwardSweep forward_representer_sweep_with_kernels(const LinearGaussianSystem& sys,
                                                    const Observations& y,
                                                    const std::vector<AffineGaussianKernel>& reverse,
                                                    const std::vector<GaussianDensity>& marginals) {
  sys.validate(y);
  check_lengths(sys, marginals.size());
  if (static_cast<Index>(reverse.size()) != sys.horizon()) {
    throw InputError("forward sweep: need one reverse kernel per transition");
  }
  ForwardSweep out;
  out.rho.push_back(initial_forward_representer(sys, y));
  out.rho_pred.push_back(LogQuadraticForm::from_log_pdf(sys.init));
  for (Index t = 1; t <= sys.horizon(); ++t) {
    auto pred = forward_predictive_update(out.rho.back(), sys.transitions[t - 1], reverse[t - 1]);
    out.rho.push_back(pred + LogQuadraticForm::likelihood(sys.observations[t], y[t]));
    out.rho_pred.push_back(std::move(pred));
  }
  out.reverse_kernels = reverse;
  for (std::size_t t = 0; t < marginals.size(); ++t) {
    out.values.push_back(expectation(out.rho[t], marginals[t]));
  }
  return out;
}

LogQuadraticForm backward_update(const LogQuadraticForm& l, const AffineGaussianKernel& transition,
                                 const AffineGaussianKernel& forward) {
  const Index d = transition.in_dim();
  const auto from_next = expect_affine(l, forward.slope, forward.offset, forward.cov);
  // x' = F x + e + w enters the transition density through [x'; x].
  const Matrix b = stack(forward.slope, Matrix::Identity(d, d));
  const Vector o = stack(forward.offset, Vector::Zero(d));
  const auto from_transition = expect_affine(kernel_log_density_form(transition), b, o,
                                             block_diag(forward.cov, Matrix::Zero(d, d)));
  return (from_next + from_transition).shifted(kernel_entropy(forward));
}

AffineGaussianKernel optimal_forward_kernel(const LogQuadraticForm& l,
                                            const AffineGaussianKernel& transition) {
  const Index d = transition.out_dim();
  const auto llt_q = cholesky(transition.cov, "transition covariance");
  const Matrix q_inv = symmetrized(llt_q.solve(Matrix::Identity(d, d)));
  const auto llt = cholesky(symmetrized(q_inv + l.precision), "forward kernel precision");
  return AffineGaussianKernel(llt.solve(q_inv * transition.slope),
                              llt.solve(q_inv * transition.offset + l.linear),
                              symmetrized(llt.solve(Matrix::Identity(d, d))));
}

namespace {

BackwardSweep finish_backward(BackwardSweep out, const LinearGaussianSystem& sys, const Observations& y,
                              const std::vector<GaussianDensity>& marginals) {
  auto top = quadratic_times_gaussian(
      out.beta.front() + LogQuadraticForm::likelihood(sys.observations.front(), y.front()), sys.init);
  out.initial = std::move(top.posterior);
  out.log_evidence_bound = top.log_norm;
  for (std::size_t t = 0; t < marginals.size(); ++t) {
    out.values.push_back(expectation(out.beta[t], marginals[t]));
  }
  return out;
}

}  // namespace

BackwardSweep backward_representer_sweep(const LinearGaussianSystem& sys, const Observations& y,
                                         const std::vector<GaussianDensity>& marginals) {
  sys.validate(y);
  check_lengths(sys, marginals.size());
  const Index T = sys.horizon();
  BackwardSweep out;
  out.beta.resize(T + 1);
  out.forward_kernels.resize(T);
  out.beta[T] = LogQuadraticForm::zero(sys.state_dim());
  for (Index t = T; t >= 1; --t) {
    try {
      const auto l = out.beta[t] + LogQuadraticForm::likelihood(sys.observations[t], y[t]);
      out.forward_kernels[t - 1] = optimal_forward_kernel(l, sys.transitions[t - 1]);
      out.beta[t - 1] = backward_update(l, sys.transitions[t - 1], out.forward_kernels[t - 1]);
    } catch (const NumericError& e) {
      throw NumericError("time " + std::to_string(t) + ": " + e.what());
    }
  }
  return finish_backward(std::move(out), sys, y, marginals);
}

BackwardSweep backward_representer_sweep_with_kernels(
    const LinearGaussianSystem& sys, const Observations& y,
    const std::vector<AffineGaussianKernel>& forward, const std::vector<GaussianDensity>& marginals) {
  sys.validate(y);
  check_lengths(sys, marginals.size());
  const Index T = sys.horizon();
  if (static_cast<Index>(forward.size()) != T) {
    throw InputError("backward sweep: need one forward kernel per transition");
  }
  BackwardSweep out;
  out.beta.resize(T + 1);
  out.forward_kernels = forward;
  out.beta[T] = LogQuadraticForm::zero(sys.state_dim());
  for (Index t = T; t >= 1; --t) {
    const auto l = out.beta[t] + LogQuadraticForm::likelihood(sys.observations[t], y[t]);
    out.beta[t - 1] = backward_update(l, sys.transitions[t - 1], forward[t - 1]);
  }
  return finish_backward(std::move(out), sys, y, marginals);
}

GaussianDensity variational_two_filter(const ForwardSweep& forward, const BackwardSweep& backward,
                                       Index t) {
  const auto i = static_cast<std::size_t>(t);
  return normalize(forward.rho.at(i) + backward.beta.at(i)).posterior;
}

GaussMarkovPosterior GaussMarkovPosterior::from_reverse(const GaussianDensity& terminal,
                                                        const std::vector<AffineGaussianKernel>& reverse) {
  const std::size_t T = reverse.size();
  GaussMarkovPosterior out;
  out.marginals.resize(T + 1);
  out.forward_kernels.resize(T);
  out.reverse_kernels = reverse;
  out.marginals[T] = terminal;
  for (std::size_t t = T; t >= 1; --t) {
    const Index d_prev = reverse[t - 1].out_dim();
    // Joint over [x_{t-1}; x_t], reordered to [x_t; x_{t-1}] and split.
    const auto joint = compose_joint(out.marginals[t], reverse[t - 1]);
    auto split = factor_joint(swap_blocks(joint, d_prev), out.marginals[t].dim());
    out.marginals[t - 1] = std::move(split.marginal);
    out.forward_kernels[t - 1] = std::move(split.conditional);
  }
  return out;
}

GaussMarkovPosterior GaussMarkovPosterior::from_forward(const GaussianDensity& initial,
                                                        const std::vector<AffineGaussianKernel>& forward) {
  const std::size_t T = forward.size();
  GaussMarkovPosterior out;
  out.marginals.resize(T + 1);
  out.reverse_kernels.resize(T);
  out.forward_kernels = forward;
  out.marginals[0] = initial;
  for (std::size_t t = 1; t <= T; ++t) {
    const Index d_next = forward[t - 1].out_dim();
    const auto joint = compose_joint(out.marginals[t - 1], forward[t - 1]);
    auto split = factor_joint(swap_blocks(joint, d_next), out.marginals[t - 1].dim());
    out.marginals[t] = std::move(split.marginal);
    out.reverse_kernels[t - 1] = std::move(split.conditional);
  }
  return out;
}

LinearSmootherResult fixed_point_smoother(const LinearGaussianSystem& sys, const Observations& y,
                                          const std::vector<GaussianDensity>& init_marginals,
                                          int iters) {
  if (iters < 1) throw InputError("fixed_point_smoother: iters must be at least 1");
  LinearSmootherResult out;
  std::vector<GaussianDensity> marginals = init_marginals;
  for (int it = 0; it < iters; ++it) {
    const auto sweep = forward_representer_sweep(sys, y, marginals);
    const auto terminal = normalize(sweep.rho.back()).posterior;
    out.posterior = GaussMarkovPosterior::from_reverse(terminal, sweep.reverse_kernels);
    out.elbo_trace.push_back(expectation(sweep.rho.back(), terminal) + entropy(terminal));
    marginals = out.posterior.marginals;
  }
  return out;
}

LinearSmootherResult backward_fixed_point_smoother(const LinearGaussianSystem& sys,
                                                   const Observations& y,
                                                   const std::vector<GaussianDensity>& init_marginals,
                                                   int iters) {
  if (iters < 1) throw InputError("backward_fixed_point_smoother: iters must be at least 1");
  LinearSmootherResult out;
  std::vector<GaussianDensity> marginals = init_marginals;
  for (int it = 0; it < iters; ++it) {
    const auto sweep = backward_representer_sweep(sys, y, marginals);
    out.posterior = GaussMarkovPosterior::from_forward(sweep.initial, sweep.forward_kernels);
    out.elbo_trace.push_back(sweep.log_evidence_bound);
    marginals = out.posterior.marginals;
  }
  return out;
}

double linear_elbo(const GaussMarkovPosterior& posterior, const LinearGaussianSystem& sys,
                   const Observations& y) {
  const auto sweep =
      forward_representer_sweep_with_kernels(sys, y, posterior.reverse_kernels, posterior.marginals);
  const auto& terminal = posterior.marginals.back();
  return sweep.values.back() + entropy(terminal);
}

CollapsedRepresenter courts_initial(const LinearGaussianSystem& sys, const Observations& y) {
  sys.validate(y);
  auto n = normalize(initial_forward_representer(sys, y));
  return CollapsedRepresenter{n.log_norm, std::move(n.posterior)};
}

CollapsedRepresenter courts_collapse_step(const CollapsedRepresenter& prev,
                                          const LinearGaussianSystem& sys, const Observations& y,
                                          Index t) {
  if (t < 1 || t > sys.horizon()) throw InputError("courts_collapse_step: time out of range");
  const auto rho_prev = LogQuadraticForm::from_log_pdf(prev.density).shifted(prev.log_kappa);
  const auto& transition = sys.transitions[t - 1];
  // In this family the optimal reverse kernel does not depend on q_t, so the
  // joint maximization separates.
  const auto rev = optimal_reverse_kernel(rho_prev, transition);
  const auto rho = forward_predictive_update(rho_prev, transition, rev) +
                   LogQuadraticForm::likelihood(sys.observations[t], y[t]);
  auto q = normalize(rho).posterior;
  const double log_kappa = expectation(rho, q) + entropy(q);
  return CollapsedRepresenter{log_kappa, std::move(q)};
}

std::vector<CollapsedRepresenter> courts_filter(const LinearGaussianSystem& sys, const Observations& y) {
  std::vector<CollapsedRepresenter> out{courts_initial(sys, y)};
  for (Index t = 1; t <= sys.horizon(); ++t) out.push_back(courts_collapse_step(out.back(), sys, y, t));
  return out;
}

}  // namespace vse
