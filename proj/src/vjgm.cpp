#include "vjgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vse {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void rethrow_at(Index t, const NumericError& e) {
  throw NumericError("time " + std::to_string(t) + ": " + e.what());
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// E_{x ~ g}[log N(y; H x, S)]
double expected_log_likelihood(const ConditionalLikelihood& l, const GaussianDensity& g) {
  const auto llt = cholesky(l.S, "likelihood covariance");
  const Matrix hp = l.H * g.cov;
  return log_pdf(GaussianDensity{l.H * g.mean, l.S}, l.y) -
         0.5 * llt.solve(hp * l.H.transpose()).trace();
}

// Precision-weighted average of the per-regime reverse kernels.
AffineGaussianKernel average_reverse(const RegimePrediction& tilde, const Vector& w) {
  const Index d_out = tilde.rev.front().out_dim();
  const Index d_in = tilde.rev.front().in_dim();
  Matrix prec = Matrix::Zero(d_out, d_out);
  Matrix slope = Matrix::Zero(d_out, d_in);
  Vector offset = Vector::Zero(d_out);
  for (Index j = 0; j < w.size(); ++j) {
    if (w(j) == 0.0) continue;
    const auto& k = tilde.rev[static_cast<std::size_t>(j)];
    const auto llt = cholesky(k.cov, "regime reverse-kernel covariance");
    prec += w(j) * llt.solve(Matrix::Identity(d_out, d_out));
    slope += w(j) * llt.solve(k.slope);
    offset += w(j) * llt.solve(k.offset);
  }
  const auto llt = cholesky(symmetrized(prec), "averaged reverse-kernel precision");
  return AffineGaussianKernel(llt.solve(slope), llt.solve(offset),
                              symmetrized(llt.solve(Matrix::Identity(d_out, d_out))));
}

double kernel_distance(const ReverseKernelPair& a, const ReverseKernelPair& b) {
  return std::max({(a.f_rev.matrix - b.f_rev.matrix).cwiseAbs().maxCoeff(),
                   (a.g_rev.slope - b.g_rev.slope).cwiseAbs().maxCoeff(),
                   (a.g_rev.offset - b.g_rev.offset).cwiseAbs().maxCoeff(),
                   (a.g_rev.cov - b.g_rev.cov).cwiseAbs().maxCoeff()});
}

}  // namespace

double ForwardRepresenter::operator()(const Vector& x, Index z) const {
  return log_kappa + f_star.log_prob(z) + log_pdf(g_star.at(static_cast<std::size_t>(z)), x);
}

ChainPrediction chain_predict(const Categorical& f_prev_star, const CategoricalKernel& kernel) {
  const Index M = kernel.size();
  if (f_prev_star.size() != M) throw InputError("chain_predict: size mismatch");
  const Vector pred = kernel.matrix * f_prev_star.probs;
  Matrix rev(M, M);
  for (Index i = 0; i < M; ++i) {
    const Vector joint = kernel.matrix.row(i).transpose().cwiseProduct(f_prev_star.probs);
    const double mass = joint.sum();
    rev.col(i) = mass > 0.0 ? Vector(joint / mass) : Vector::Constant(M, 1.0 / static_cast<double>(M));
  }
  Vector p = pred.cwiseMax(0.0);
  p /= p.sum();
  return ChainPrediction{Categorical(p), CategoricalKernel(rev)};
}

RegimePrediction joint_predict_reverse(const std::vector<GaussianDensity>& g_star_prev,
                                       const std::vector<AffineGaussianKernel>& state_kernels) {
  if (g_star_prev.size() != state_kernels.size()) {
    throw InputError("joint_predict_reverse: one kernel per regime required");
  }
  RegimePrediction out;
  for (std::size_t z = 0; z < state_kernels.size(); ++z) {
    auto pr = predict_and_reverse(g_star_prev[z], state_kernels[z]);
    out.pred.push_back(std::move(pr.predictive));
    out.rev.push_back(std::move(pr.reverse));
  }
  return out;
}

MixedJoint mix_joint(const RegimePrediction& tilde, const CategoricalKernel& f_rev, Index z_t) {
  const Index d_prev = tilde.rev.front().out_dim();
  std::vector<GaussianDensity> joints;
  joints.reserve(tilde.pred.size());
  for (std::size_t j = 0; j < tilde.pred.size(); ++j) {
    joints.push_back(compose_joint(tilde.pred[j], tilde.rev[j]));  // over [x_{t-1}; x_t]
  }
  auto avg = average_log_gaussians(joints, f_rev.column(z_t));
  auto split = factor_joint(avg.density, d_prev);
  return MixedJoint{avg.log_zeta, std::move(split.conditional), std::move(split.marginal)};
}

ZetaDagger zeta_dagger(const CategoricalKernel& f_rev, const CategoricalKernel& f_rev_dagger) {
  const Index M = f_rev.size();
  if (f_rev_dagger.size() != M) throw InputError("zeta_dagger: size mismatch");
  ZetaDagger out{Vector::Zero(M), false};
  for (Index z = 0; z < M; ++z) {
    double acc = 0.0;
    for (Index j = 0; j < M; ++j) {
      const double f = f_rev.matrix(j, z);
      if (f == 0.0) continue;
      const double fd = f_rev_dagger.matrix(j, z);
      if (fd == 0.0) {
        acc = kNegInf;
        out.support_violation = true;
        break;
      }
      acc += f * std::log(fd / f);
    }
    out.log_zeta(z) = std::min(acc, 0.0);
  }
  return out;
}

HDagger h_dagger(const AffineGaussianKernel& g_dagger_rev, const AffineGaussianKernel& g_rev) {
  auto l = conditional_relative_entropy_likelihood(g_rev, g_dagger_rev);
  // N(y; H x, S) == N(-y; -H x, S): flip to express the slope as A_dagger - A_rev.
  l.y = -l.y;
  l.H = -l.H;
  const auto llt = cholesky(l.S, "h_dagger covariance");
  const Matrix s_inv_h = llt.solve(l.H);
  const Vector s_inv_y = llt.solve(l.y);
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  HDagger out;
  out.log_eta_dagger = l.log_c - 0.5 * (static_cast<double>(l.y.size()) * kLog2Pi + log_det(llt));
  out.log_h = LogQuadraticForm(symmetrized(l.H.transpose() * s_inv_h), l.H.transpose() * s_inv_y,
                               -0.5 * l.y.dot(s_inv_y));
  out.likelihood = std::move(l);
  return out;
}

StepContext prepare_step(const ForwardRepresenter& prev, const JumpGMSystem& sys, Index t) {
  try {
    return StepContext{t, chain_predict(prev.f_star, sys.chain_kernel),
                       joint_predict_reverse(prev.g_star, sys.state_kernels)};
  } catch (const NumericError& e) {
    rethrow_at(t, e);
  }
}

double PredictiveRepresenter::operator()(const Vector& x, Index z) const {
  const auto i = static_cast<std::size_t>(z);
  return log_kappa_prev + log_weight(z) + log_h_dagger[i](x) + log_pdf(g_pred[i], x);
}

PredictiveRepresenter predictive_representer(const StepContext& ctx, const ReverseKernelPair& rev,
                                             double log_kappa_prev) {
  const Index M = ctx.chain.f_pred.size();
  PredictiveRepresenter out;
  out.log_kappa_prev = log_kappa_prev;
  out.log_weight = Vector(M);
  try {
    const auto zeta = zeta_dagger(rev.f_rev, ctx.chain.f_rev_dagger);
    out.support_violation = zeta.support_violation;
    for (Index z = 0; z < M; ++z) {
      auto mixed = mix_joint(ctx.tilde, rev.f_rev, z);
      auto hd = h_dagger(mixed.g_dagger_rev, rev.g_rev);
      out.log_weight(z) = hd.log_eta_dagger + zeta.log_zeta(z) + mixed.log_eta +
                          ctx.chain.f_pred.log_prob(z);
      out.g_pred.push_back(std::move(mixed.g_pred));
      out.log_h_dagger.push_back(std::move(hd.log_h));
    }
  } catch (const NumericError& e) {
    rethrow_at(ctx.t, e);
  }
  return out;
}

ForwardRepresenter value_update(const PredictiveRepresenter& pred, const JumpGMSystem& sys,
                                const Vector& y_t, Index t) {
  const Index M = pred.log_weight.size();
  Vector log_w(M);
  ForwardRepresenter out;
  try {
    for (Index z = 0; z < M; ++z) {
      const auto i = static_cast<std::size_t>(z);
      const auto lq = pred.log_h_dagger[i] + LogQuadraticForm::likelihood(sys.obs_kernels[i], y_t);
      auto prod = quadratic_times_gaussian(lq, pred.g_pred[i]);
      log_w(z) = pred.log_weight(z) + prod.log_norm;
      out.g_star.push_back(std::move(prod.posterior));
    }
  } catch (const NumericError& e) {
    rethrow_at(t, e);
  }
  const std::span<const double> view(log_w.data(), static_cast<std::size_t>(M));
  const double total = log_sum_exp(view);
  if (!std::isfinite(total)) {
    throw NumericError("time " + std::to_string(t) + ": every regime weight vanished");
  }
  out.log_kappa = pred.log_kappa_prev + total;
  out.f_star = Categorical::from_log_weights(log_w);
  return out;
}

ForwardRepresenter value_update(const ForwardRepresenter& prev, const JumpGMSystem& sys,
                                const Vector& y_t, const ReverseKernelPair& rev, Index t) {
  const auto ctx = prepare_step(prev, sys, t);
  return value_update(predictive_representer(ctx, rev, prev.log_kappa), sys, y_t, t);
}

PredictiveRepresenter initial_predictive(const JumpGMSystem& sys) {
  const Index M = sys.regimes();
  PredictiveRepresenter out;
  out.log_weight = Vector(M);
  for (Index z = 0; z < M; ++z) {
    out.log_weight(z) = sys.chain_init.log_prob(z);
    out.g_pred.push_back(sys.state_init[static_cast<std::size_t>(z)]);
    out.log_h_dagger.push_back(LogQuadraticForm::zero(sys.state_dim()));
  }
  return out;
}

ForwardRepresenter initial_representer(const JumpGMSystem& sys, const Vector& y0) {
  return value_update(initial_predictive(sys), sys, y0, 0);
}

double marginal_objective(const ForwardRepresenter& rep, const ProductMarginal& q) {
  double acc = rep.log_kappa;
  for (Index z = 0; z < rep.regimes(); ++z) {
    const double f = q.f.probs(z);
    if (f == 0.0) continue;
    acc += f * (rep.f_star.log_prob(z) + neg_relative_entropy(rep.g_star[static_cast<std::size_t>(z)], q.g) -
                std::log(f));
  }
  return acc;
}

FilterUpdate filter_update(const ForwardRepresenter& rep, int max_iters, double tol,
                           const ProductMarginal* warm) {
  if (max_iters < 1) throw InputError("filter_update: max_iters must be at least 1");
  if (!(tol > 0.0)) throw InputError("filter_update: tol must be positive");
  const Index M = rep.regimes();
  FilterUpdate out;
  Categorical f = warm ? warm->f : rep.f_star;
  GaussianDensity g;
  double last = kNegInf;
  for (int it = 1; it <= max_iters; ++it) {
    g = average_log_gaussians(rep.g_star, f).density;
    Vector log_w(M);
    for (Index z = 0; z < M; ++z) {
      log_w(z) = neg_relative_entropy(rep.g_star[static_cast<std::size_t>(z)], g) + rep.f_star.log_prob(z);
    }
    const std::span<const double> view(log_w.data(), static_cast<std::size_t>(M));
    const double bound = rep.log_kappa + log_sum_exp(view);
    f = Categorical::from_log_weights(log_w);
    out.trace.push_back(bound);
    out.iterations = it;
    if (std::abs(bound - last) < tol) {
      out.converged = true;
      break;
    }
    last = bound;
  }
  out.bound = out.trace.back();
  out.marginal = ProductMarginal{std::move(f), std::move(g)};
  return out;
}

ReverseKernelPair initial_reverse_kernels(const StepContext& ctx) {
  // sum_{z_t} f_dagger(j | z_t) f_pred(z_t) = f*_{t-1}(j)
  const Vector w = ctx.chain.f_rev_dagger.matrix * ctx.chain.f_pred.probs;
  return ReverseKernelPair{ctx.chain.f_rev_dagger, average_reverse(ctx.tilde, w)};
}

Vector log_zeta_prev(const StepContext& ctx, const GaussianDensity& g_t, const AffineGaussianKernel& g_rev) {
  const auto M = static_cast<Index>(ctx.tilde.rev.size());
  Vector out(M);
  for (Index j = 0; j < M; ++j) {
    const auto i = static_cast<std::size_t>(j);
    const auto l = conditional_relative_entropy_likelihood(g_rev, ctx.tilde.rev[i]);
    out(j) = l.log_c + expected_log_likelihood(l, g_t) + expected_log_pdf(ctx.tilde.pred[i], g_t);
  }
  return out;
}

ReverseKernelPair reverse_kernel_update(const StepContext& ctx, const ProductMarginal& current,
                                        const ReverseKernelPair& rev) {
  try {
    const Index M = ctx.chain.f_pred.size();
    const Vector log_zeta = log_zeta_prev(ctx, current.g, rev.g_rev);
    Matrix f_rev(M, M);
    for (Index z = 0; z < M; ++z) {
      Vector lw(M);
      for (Index j = 0; j < M; ++j) lw(j) = safe_log(ctx.chain.f_rev_dagger.matrix(j, z)) + log_zeta(j);
      f_rev.col(z) = Categorical::from_log_weights(lw).probs;
    }
    const Vector w = f_rev * current.f.probs;
    return ReverseKernelPair{CategoricalKernel(f_rev), average_reverse(ctx.tilde, w)};
  } catch (const NumericError& e) {
    rethrow_at(ctx.t, e);
  }
}

namespace {

VjgmFilterResult run_filter(const JumpGMSystem& sys, const Observations& y, const VjgmOptions& options,
                            bool collapse) {
  sys.validate(y);
  VjgmFilterResult out;
  auto collapse_step = [&](FilterStep& step) {
    if (!collapse) return;
    step.rep = ForwardRepresenter{step.bound, step.marginal.f,
                                  std::vector<GaussianDensity>(static_cast<std::size_t>(sys.regimes()),
                                                               step.marginal.g)};
  };

  {
    FilterStep step;
    step.predictive = initial_predictive(sys);
    step.rep = value_update(step.predictive, sys, y[0], 0);
    auto fu = filter_update(step.rep, options.filter_max_iters, options.filter_tol);
    step.marginal = std::move(fu.marginal);
    step.bound = fu.bound;
    step.inner_trace.push_back(fu.bound);
    step.filter_traces.push_back(std::move(fu.trace));
    collapse_step(step);
    out.steps.push_back(std::move(step));
  }

  for (Index t = 1; t <= sys.horizon; ++t) {
    const auto& prev = out.steps.back().rep;
    const auto ctx = prepare_step(prev, sys, t);
    FilterStep step;
    step.reverse = initial_reverse_kernels(ctx);
    step.converged = false;
    for (int it = 1; it <= options.inner_max_iters; ++it) {
      step.predictive = predictive_representer(ctx, step.reverse, prev.log_kappa);
      step.rep = value_update(step.predictive, sys, y[static_cast<std::size_t>(t)], t);
      auto fu = filter_update(step.rep, options.filter_max_iters, options.filter_tol,
                              it == 1 ? nullptr : &step.marginal);
      step.marginal = std::move(fu.marginal);
      step.filter_traces.push_back(std::move(fu.trace));
      const double last = step.bound;
      step.bound = fu.bound;
      step.inner_trace.push_back(fu.bound);
      if (it > 1 && std::abs(step.bound - last) < options.inner_tol) {
        step.converged = true;
        break;
      }
      if (it == options.inner_max_iters) break;
      step.reverse = reverse_kernel_update(ctx, step.marginal, step.reverse);
    }
    collapse_step(step);
    out.steps.push_back(std::move(step));
  }
  return out;
}

}  // namespace

VjgmFilterResult suboptimal_filter(const JumpGMSystem& sys, const Observations& y,
                                   const VjgmOptions& options) {
  return run_filter(sys, y, options, false);
}

VjgmFilterResult collapsed_filter(const JumpGMSystem& sys, const Observations& y,
                                  const VjgmOptions& options) {
  return run_filter(sys, y, options, true);
}

std::vector<ProductMarginal> backward_marginals(const ProductMarginal& terminal,
                                                const std::vector<ReverseKernelPair>& reverse) {
  std::vector<ProductMarginal> out(reverse.size() + 1);
  out.back() = terminal;
  for (std::size_t t = reverse.size(); t >= 1; --t) {
    out[t - 1] = ProductMarginal{reverse[t - 1].f_rev.apply(out[t].f), reverse[t - 1].g_rev.push(out[t].g)};
  }
  return out;
}

VjgmPosterior posterior_from_filter(const VjgmFilterResult& filter) {
  VjgmPosterior out;
  for (std::size_t t = 0; t < filter.steps.size(); ++t) {
    out.representers.push_back(filter.steps[t].rep);
    if (t > 0) out.reverse_kernels.push_back(filter.steps[t].reverse);
  }
  out.marginals = backward_marginals(filter.steps.back().marginal, out.reverse_kernels);
  out.elbo = filter.log_evidence_bound();
  out.elbo_trace.push_back(out.elbo);
  return out;
}

VjgmPosterior fixed_point_smoother(const JumpGMSystem& sys, const Observations& y,
                                   const VjgmFilterResult& init, int iters, const VjgmOptions& options) {
  if (iters < 0) throw InputError("fixed_point_smoother: iters must be non-negative");
  sys.validate(y);
  VjgmPosterior post = posterior_from_filter(init);
  const Index T = sys.horizon;
  for (int it = 0; it < iters; ++it) {
    std::vector<ForwardRepresenter> reps{initial_representer(sys, y[0])};
    for (Index t = 1; t <= T; ++t) {
      const auto i = static_cast<std::size_t>(t);
      const auto ctx = prepare_step(reps.back(), sys, t);
      auto& rev = post.reverse_kernels[i - 1];
      for (int k = 0; k < options.kernel_max_iters; ++k) {
        auto next = reverse_kernel_update(ctx, post.marginals[i], rev);
        const double change = kernel_distance(next, rev);
        rev = std::move(next);
        if (change < options.kernel_tol) break;
      }
      reps.push_back(value_update(predictive_representer(ctx, rev, reps.back().log_kappa), sys, y[i], t));
    }
    auto fu = filter_update(reps.back(), options.filter_max_iters, options.filter_tol, &post.marginals.back());
    post.marginals = backward_marginals(fu.marginal, post.reverse_kernels);
    post.representers = std::move(reps);
    post.elbo = fu.bound;
    post.elbo_trace.push_back(fu.bound);
  }
  return post;
}

double elbo(const VjgmPosterior& posterior, const JumpGMSystem& sys, const Observations& y) {
  sys.validate(y);
  if (static_cast<Index>(posterior.reverse_kernels.size()) != sys.horizon ||
      static_cast<Index>(posterior.marginals.size()) != sys.horizon + 1) {
    throw InputError("elbo: posterior does not match the system horizon");
  }
  ForwardRepresenter rep = initial_representer(sys, y[0]);
  for (Index t = 1; t <= sys.horizon; ++t) {
    const auto i = static_cast<std::size_t>(t);
    rep = value_update(rep, sys, y[i], posterior.reverse_kernels[i - 1], t);
  }
  return marginal_objective(rep, posterior.marginals.back());
}

}  // namespace vse
