#include "exact_inference.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace vse {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void rethrow_at(Index t, const NumericError& e) {
  throw NumericError("time " + std::to_string(t) + ": " + e.what());
}

void check_observations(const std::vector<AffineGaussianKernel>& obs, const Observations& y,
                        Index horizon) {
  if (static_cast<Index>(y.size()) != horizon + 1) {
    throw InputError("expected " + std::to_string(horizon + 1) + " observations, got " +
                     std::to_string(y.size()));
  }
  for (std::size_t t = 0; t < y.size(); ++t) {
    const auto& k = obs[std::min(t, obs.size() - 1)];
    if (y[t].size() != k.out_dim()) {
      throw InputError("observation " + std::to_string(t) + " has dimension " +
                       std::to_string(y[t].size()) + ", expected " + std::to_string(k.out_dim()));
    }
    if (!y[t].allFinite()) {
      throw InputError("observation " + std::to_string(t) + " is not finite");
    }
  }
}

}  // namespace

void LinearGaussianSystem::validate() const {
  if (static_cast<Index>(observations.size()) != horizon() + 1) {
    throw InputError("linear system: need one observation kernel per time point");
  }
  const Index d = state_dim();
  for (const auto& k : transitions) {
    if (k.in_dim() != d || k.out_dim() != d) throw InputError("linear system: transition dimension mismatch");
  }
  for (const auto& k : observations) {
    if (k.in_dim() != d) throw InputError("linear system: observation kernel dimension mismatch");
  }
}

void LinearGaussianSystem::validate(const Observations& y) const {
  validate();
  check_observations(observations, y, horizon());
}

double FilterResult::cumulative_log_evidence(Index t) const {
  double acc = 0.0;
  for (Index s = 0; s <= t; ++s) acc += log_evidence_increments.at(static_cast<std::size_t>(s));
  return acc;
}

MeasurementUpdate kalman_update(const GaussianDensity& prior, const AffineGaussianKernel& obs,
                                const Vector& y) {
  const auto pr = predict_and_reverse_unguarded(prior, obs);
  return MeasurementUpdate{GaussianDensity(pr.reverse.mean_at(y), pr.reverse.cov),
                           log_pdf(pr.predictive, y)};
}

FilterResult kalman_filter(const LinearGaussianSystem& sys, const Observations& y) {
  sys.validate(y);
  const Index T = sys.horizon();
  FilterResult out;
  out.predicted.reserve(T + 1);
  out.filtered.reserve(T + 1);
  for (Index t = 0; t <= T; ++t) {
    try {
      GaussianDensity pred = t == 0 ? sys.init : sys.transitions[t - 1].push(out.filtered.back());
      auto upd = kalman_update(pred, sys.observations[t], y[t]);
      out.predicted.push_back(std::move(pred));
      out.filtered.push_back(std::move(upd.posterior));
      out.log_evidence_increments.push_back(upd.log_likelihood);
      out.log_evidence += upd.log_likelihood;
    } catch (const NumericError& e) {
      rethrow_at(t, e);
    }
  }
  return out;
}

SmootherResult rts_smoother(const LinearGaussianSystem& sys, const FilterResult& filter) {
  const Index T = sys.horizon();
  if (static_cast<Index>(filter.filtered.size()) != T + 1) {
    throw InputError("rts_smoother: filter result does not match the system horizon");
  }
  SmootherResult out;
  out.marginals.resize(T + 1);
  out.reverse_kernels.resize(T);
  out.marginals[T] = filter.filtered[T];
  for (Index t = T; t >= 1; --t) {
    try {
      auto pr = predict_and_reverse_unguarded(filter.filtered[t - 1], sys.transitions[t - 1]);
      out.marginals[t - 1] = pr.reverse.push(out.marginals[t]);
      out.reverse_kernels[t - 1] = std::move(pr.reverse);
    } catch (const NumericError& e) {
      rethrow_at(t, e);
    }
  }
  return out;
}

LogQuadraticForm pull_back(const LogQuadraticForm& l, const AffineGaussianKernel& kernel) {
  if (l.dim() != kernel.out_dim()) throw InputError("pull_back: dimension mismatch");
  const Index d = kernel.out_dim();
  const auto llt_q = cholesky(kernel.cov, "kernel covariance");
  const Matrix q_inv = symmetrized(llt_q.solve(Matrix::Identity(d, d)));
  const Matrix lambda = symmetrized(q_inv + l.precision);
  const auto llt_l = cholesky(lambda, "pulled-back precision");
  const Matrix lambda_inv_q_inv = llt_l.solve(q_inv);
  // As a form in the kernel mean mu.
  const Matrix j_mu = symmetrized(q_inv - q_inv * lambda_inv_q_inv);
  const Vector l_mu = lambda_inv_q_inv.transpose() * l.linear;
  const double c_mu = l.constant + 0.5 * l.linear.dot(llt_l.solve(l.linear)) -
                      0.5 * log_det(llt_q) - 0.5 * log_det(llt_l);
  const LogQuadraticForm in_mean(j_mu, l_mu, c_mu);
  return expect_affine(in_mean, kernel.slope, kernel.offset, Matrix::Zero(d, d));
}

std::vector<LogQuadraticForm> backward_information_filter(const LinearGaussianSystem& sys,
                                                          const Observations& y) {
  sys.validate(y);
  const Index T = sys.horizon();
  std::vector<LogQuadraticForm> beta(T + 1);
  beta[T] = LogQuadraticForm::zero(sys.state_dim());
  for (Index t = T; t >= 1; --t) {
    try {
      const auto l = beta[t] + LogQuadraticForm::likelihood(sys.observations[t], y[t]);
      beta[t - 1] = pull_back(l, sys.transitions[t - 1]);
    } catch (const NumericError& e) {
      rethrow_at(t, e);
    }
  }
  return beta;
}

TwoFilterResult two_filter_combine(const FilterResult& forward,
                                   const std::vector<LogQuadraticForm>& backward) {
  if (forward.filtered.size() != backward.size()) {
    throw InputError("two_filter_combine: forward and backward lengths differ");
  }
  TwoFilterResult out;
  double cumulative = 0.0;
  for (std::size_t t = 0; t < backward.size(); ++t) {
    cumulative += forward.log_evidence_increments[t];
    try {
      auto prod = quadratic_times_gaussian(backward[t], forward.filtered[t]);
      out.marginals.push_back(std::move(prod.posterior));
      out.log_normalizers.push_back(prod.log_norm + cumulative);
    } catch (const NumericError& e) {
      rethrow_at(static_cast<Index>(t), e);
    }
  }
  return out;
}

void JumpGMSystem::validate() const {
  const Index M = regimes();
  if (M < 1) throw InputError("jump system: need at least one regime");
  if (horizon < 0) throw InputError("jump system: negative horizon");
  if (chain_kernel.size() != M || static_cast<Index>(state_init.size()) != M ||
      static_cast<Index>(state_kernels.size()) != M || static_cast<Index>(obs_kernels.size()) != M) {
    throw InputError("jump system: every per-regime list must have " + std::to_string(M) + " entries");
  }
  const Index d = state_dim();
  const Index p = obs_kernels.front().out_dim();
  for (Index z = 0; z < M; ++z) {
    if (state_init[z].dim() != d) throw InputError("jump system: initial density dimension mismatch");
    if (state_kernels[z].in_dim() != d || state_kernels[z].out_dim() != d) {
      throw InputError("jump system: state kernel dimension mismatch");
    }
    if (obs_kernels[z].in_dim() != d || obs_kernels[z].out_dim() != p) {
      throw InputError("jump system: observation kernel dimension mismatch");
    }
  }
}

void JumpGMSystem::validate(const Observations& y) const {
  validate();
  check_observations(obs_kernels, y, horizon);
}

LinearGaussianSystem JumpGMSystem::conditioned_on(std::span<const Index> path) const {
  if (static_cast<Index>(path.size()) != horizon + 1) {
    throw InputError("conditioned_on: path length must be T+1");
  }
  for (Index z : path) {
    if (z < 0 || z >= regimes()) throw InputError("conditioned_on: regime index out of range");
  }
  LinearGaussianSystem sys{state_init[path[0]], {}, {}};
  for (Index t = 0; t <= horizon; ++t) {
    if (t > 0) sys.transitions.push_back(state_kernels[path[t - 1]]);
    sys.observations.push_back(obs_kernels[path[t]]);
  }
  return sys;
}

GaussianDensity moment_match(std::span<const GaussianDensity> components, const Categorical& weights) {
  if (components.empty() || static_cast<Index>(components.size()) != weights.size()) {
    throw InputError("moment_match: weight/component count mismatch");
  }
  const Index d = components.front().dim();
  Vector mean = Vector::Zero(d);
  for (std::size_t i = 0; i < components.size(); ++i) {
    mean += weights.probs(static_cast<Index>(i)) * components[i].mean;
  }
  Matrix cov = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Vector diff = components[i].mean - mean;
    cov += weights.probs(static_cast<Index>(i)) * (components[i].cov + diff * diff.transpose());
  }
  return GaussianDensity(mean, symmetrized(cov));
}

MixtureFilterResult imm_filter(const JumpGMSystem& sys, const Observations& y) {
  sys.validate(y);
  const Index M = sys.regimes();
  const Index T = sys.horizon;
  MixtureFilterResult out;
  for (Index t = 0; t <= T; ++t) {
    try {
      std::vector<GaussianDensity> comps(M);
      Vector log_w(M);
      if (t == 0) {
        for (Index i = 0; i < M; ++i) {
          auto upd = kalman_update(sys.state_init[i], sys.obs_kernels[i], y[0]);
          comps[i] = std::move(upd.posterior);
          log_w(i) = sys.chain_init.log_prob(i) + upd.log_likelihood;
        }
      } else {
        const auto& prev_probs = out.regime_probs.back();
        const auto& prev = out.components.back();
        std::vector<GaussianDensity> predicted(M);
        for (Index j = 0; j < M; ++j) predicted[j] = sys.state_kernels[j].push(prev[j]);
        for (Index i = 0; i < M; ++i) {
          const Vector joint = sys.chain_kernel.matrix.row(i).transpose().cwiseProduct(prev_probs.probs);
          const double mass = joint.sum();
          const Categorical mix = mass > 0.0 ? Categorical(joint / mass) : prev_probs;
          auto upd = kalman_update(moment_match(predicted, mix), sys.obs_kernels[i], y[t]);
          comps[i] = std::move(upd.posterior);
          log_w(i) = (mass > 0.0 ? std::log(mass) : kNegInf) + upd.log_likelihood;
        }
      }
      const std::span<const double> view(log_w.data(), static_cast<std::size_t>(M));
      const double increment = log_sum_exp(view);
      auto probs = Categorical::from_log_weights(log_w);
      out.moments.push_back(moment_match(comps, probs));
      out.regime_probs.push_back(std::move(probs));
      out.components.push_back(std::move(comps));
      out.log_evidence_increments.push_back(increment);
      out.log_evidence += increment;
    } catch (const NumericError& e) {
      rethrow_at(t, e);
    }
  }
  return out;
}

std::size_t BruteForceJgm::path_count(Index regimes, Index horizon) {
  std::size_t count = 1;
  for (Index t = 0; t <= horizon; ++t) {
    if (count > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(regimes)) {
      return std::numeric_limits<std::size_t>::max();
    }
    count *= static_cast<std::size_t>(regimes);
  }
  return count;
}

BruteForceJgm::BruteForceJgm(const JumpGMSystem& sys, const Observations& y, std::size_t cap)
    : sys_(sys) {
  sys.validate(y);
  const Index M = sys.regimes();
  const Index T = sys.horizon;
  const std::size_t needed = path_count(M, T);
  if (needed > cap) {
    throw InputError("brute force: " + std::to_string(M) + "^" + std::to_string(T + 1) + " = " +
                     (needed == std::numeric_limits<std::size_t>::max() ? std::string("overflow")
                                                                        : std::to_string(needed)) +
                     " regime paths exceed the enumeration cap of " + std::to_string(cap));
  }
  levels_.resize(static_cast<std::size_t>(T + 1));
  for (Index t = 0; t <= T; ++t) {
    auto& level = levels_[static_cast<std::size_t>(t)];
    try {
      if (t == 0) {
        for (Index z = 0; z < M; ++z) {
          Node n;
          n.regime = z;
          n.log_prior_weight = sys.chain_init.log_prob(z);
          n.predicted = sys.state_init[z];
          auto upd = kalman_update(n.predicted, sys.obs_kernels[z], y[0]);
          n.filtered = std::move(upd.posterior);
          n.log_weight = n.log_prior_weight + upd.log_likelihood;
          level.push_back(std::move(n));
        }
      } else {
        const auto& prev = levels_[static_cast<std::size_t>(t - 1)];
        level.reserve(prev.size() * static_cast<std::size_t>(M));
        for (std::size_t p = 0; p < prev.size(); ++p) {
          const GaussianDensity predicted = sys.state_kernels[prev[p].regime].push(prev[p].filtered);
          for (Index z = 0; z < M; ++z) {
            Node n;
            n.parent = p;
            n.regime = z;
            const double lam = sys.chain_kernel.matrix(z, prev[p].regime);
            n.log_prior_weight = prev[p].log_weight + (lam > 0.0 ? std::log(lam) : kNegInf);
            n.predicted = predicted;
            auto upd = kalman_update(predicted, sys.obs_kernels[z], y[t]);
            n.filtered = std::move(upd.posterior);
            n.log_weight = n.log_prior_weight + upd.log_likelihood;
            level.push_back(std::move(n));
          }
        }
      }
    } catch (const NumericError& e) {
      rethrow_at(t, e);
    }
    std::vector<double> lw;
    lw.reserve(level.size());
    for (const auto& n : level) lw.push_back(n.log_weight);
    cumulative_.push_back(log_sum_exp(lw));
  }
}

double BruteForceJgm::log_unnormalized_filter(Index t, const Vector& x, Index z) const {
  std::vector<double> terms;
  for (const auto& n : levels_.at(static_cast<std::size_t>(t))) {
    if (n.regime == z) terms.push_back(n.log_weight + log_pdf(n.filtered, x));
  }
  return log_sum_exp(terms);
}

double BruteForceJgm::log_unnormalized_predictive(Index t, const Vector& x, Index z) const {
  std::vector<double> terms;
  for (const auto& n : levels_.at(static_cast<std::size_t>(t))) {
    if (n.regime == z) terms.push_back(n.log_prior_weight + log_pdf(n.predicted, x));
  }
  return log_sum_exp(terms);
}

Categorical BruteForceJgm::filtering_regime_probs(Index t) const {
  const Index M = sys_.regimes();
  Vector log_w = Vector::Constant(M, kNegInf);
  std::vector<std::vector<double>> per(static_cast<std::size_t>(M));
  for (const auto& n : levels_.at(static_cast<std::size_t>(t))) {
    per[static_cast<std::size_t>(n.regime)].push_back(n.log_weight);
  }
  for (Index z = 0; z < M; ++z) log_w(z) = log_sum_exp(per[static_cast<std::size_t>(z)]);
  return Categorical::from_log_weights(log_w);
}

GaussianDensity BruteForceJgm::filtering_moments(Index t) const {
  const auto& level = levels_.at(static_cast<std::size_t>(t));
  Vector log_w(static_cast<Index>(level.size()));
  std::vector<GaussianDensity> comps;
  comps.reserve(level.size());
  for (std::size_t i = 0; i < level.size(); ++i) {
    log_w(static_cast<Index>(i)) = level[i].log_weight;
    comps.push_back(level[i].filtered);
  }
  return moment_match(comps, Categorical::from_log_weights(log_w));
}

BruteForceJgm::Smoothing BruteForceJgm::smoothing() const {
  const Index M = sys_.regimes();
  const Index T = sys_.horizon;
  const Index d = sys_.state_dim();
  // Reverse kernel of every non-terminal prefix.
  std::vector<std::vector<AffineGaussianKernel>> reverse(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    for (const auto& n : levels_[static_cast<std::size_t>(t)]) {
      reverse[static_cast<std::size_t>(t)].push_back(
          predict_and_reverse_unguarded(n.filtered, sys_.state_kernels[n.regime]).reverse);
    }
  }
  std::vector<Vector> probs(static_cast<std::size_t>(T + 1), Vector::Zero(M));
  std::vector<Vector> first(static_cast<std::size_t>(T + 1), Vector::Zero(d));
  std::vector<Matrix> second(static_cast<std::size_t>(T + 1), Matrix::Zero(d, d));
  const double log_z = log_evidence();
  const auto& leaves = levels_.back();
  for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) {
    const double w = std::exp(leaves[leaf].log_weight - log_z);
    if (w == 0.0) continue;
    GaussianDensity sm = leaves[leaf].filtered;
    std::size_t idx = leaf;
    for (Index t = T; t >= 0; --t) {
      const auto& node = levels_[static_cast<std::size_t>(t)][idx];
      if (t < T) sm = reverse[static_cast<std::size_t>(t)][idx].push(sm);
      const auto s = static_cast<std::size_t>(t);
      probs[s](node.regime) += w;
      first[s] += w * sm.mean;
      second[s] += w * (sm.cov + sm.mean * sm.mean.transpose());
      idx = node.parent;
    }
  }
  Smoothing out;
  for (Index t = 0; t <= T; ++t) {
    const auto s = static_cast<std::size_t>(t);
    Vector p = probs[s] / probs[s].sum();
    out.regime_probs.emplace_back(p);
    out.moments.emplace_back(first[s], symmetrized(second[s] - first[s] * first[s].transpose()));
  }
  return out;
}

}  // namespace vse
