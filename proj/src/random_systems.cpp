#include "random_systems.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace vse {

Rng::Rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  for (auto k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

Vector Rng::normal(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Vector Rng::sample(const GaussianDensity& g) {
  const auto llt = cholesky(g.cov, "sampling covariance");
  return g.mean + Matrix(llt.matrixL()) * normal(g.dim());
}

Index Rng::categorical(const Vector& probs) {
  const double u = uniform();
  double acc = 0.0;
  for (Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return i;
  }
  for (Index i = probs.size() - 1; i >= 0; --i) {
    if (probs(i) > 0.0) return i;
  }
  throw InputError("categorical: no positive probability");
}

Matrix random_spd(Rng& rng, Index d, double min_eig, double max_eig) {
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = rng.normal();
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ();
  Vector eig(d);
  for (Index i = 0; i < d; ++i) eig(i) = min_eig + (max_eig - min_eig) * rng.uniform();
  return symmetrized(q * eig.asDiagonal() * q.transpose());
}

namespace {

Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

AffineGaussianKernel random_transition(Rng& rng, Index d) {
  return AffineGaussianKernel(random_matrix(rng, d, d, 0.6), random_matrix(rng, d, 1, 0.5).col(0),
                              random_spd(rng, d, 0.2, 1.0));
}

AffineGaussianKernel random_observation(Rng& rng, Index d) {
  Matrix c = random_matrix(rng, d, d, 0.5);
  c.diagonal().array() += 1.0;
  return AffineGaussianKernel(c, random_matrix(rng, d, 1, 0.3).col(0), random_spd(rng, d, 0.3, 1.5));
}

}  // namespace

LinearGaussianSystem random_linear_system(Rng& rng, Index d, Index horizon) {
  LinearGaussianSystem sys;
  sys.init = GaussianDensity(rng.normal(d), random_spd(rng, d, 0.5, 2.0));
  for (Index t = 0; t < horizon; ++t) sys.transitions.push_back(random_transition(rng, d));
  for (Index t = 0; t <= horizon; ++t) sys.observations.push_back(random_observation(rng, d));
  return sys;
}

Observations sample_observations(const LinearGaussianSystem& sys, Rng& rng) {
  Observations y;
  Vector x = rng.sample(sys.init);
  for (Index t = 0; t <= sys.horizon(); ++t) {
    if (t > 0) x = rng.sample(GaussianDensity(sys.transitions[t - 1].mean_at(x), sys.transitions[t - 1].cov));
    const auto& obs = sys.observations[static_cast<std::size_t>(t)];
    y.push_back(rng.sample(GaussianDensity(obs.mean_at(x), obs.cov)));
  }
  return y;
}

JumpGMSystem random_jump_system(Rng& rng, Index regimes, Index d, Index horizon) {
  JumpGMSystem sys;
  Vector init(regimes);
  for (Index i = 0; i < regimes; ++i) init(i) = 0.2 + rng.uniform();
  sys.chain_init = Categorical(init / init.sum());
  Matrix lambda(regimes, regimes);
  for (Index j = 0; j < regimes; ++j) {
    for (Index i = 0; i < regimes; ++i) lambda(i, j) = 0.1 + rng.uniform() + (i == j ? 1.0 : 0.0);
    lambda.col(j) /= lambda.col(j).sum();
  }
  sys.chain_kernel = CategoricalKernel(lambda);
  for (Index z = 0; z < regimes; ++z) {
    sys.state_init.emplace_back(2.0 * rng.normal(d), random_spd(rng, d, 0.3, 1.5));
    sys.state_kernels.push_back(random_transition(rng, d));
    sys.obs_kernels.push_back(random_observation(rng, d));
  }
  sys.horizon = horizon;
  sys.validate();
  return sys;
}

JumpPaths sample_paths(const JumpGMSystem& sys, Rng& rng) {
  JumpPaths out;
  Index z = rng.categorical(sys.chain_init.probs);
  Vector x = rng.sample(sys.state_init[static_cast<std::size_t>(z)]);
  for (Index t = 0; t <= sys.horizon; ++t) {
    if (t > 0) {
      const auto& k = sys.state_kernels[static_cast<std::size_t>(z)];
      x = rng.sample(GaussianDensity(k.mean_at(x), k.cov));
      z = rng.categorical(sys.chain_kernel.matrix.col(z));
    }
    const auto& obs = sys.obs_kernels[static_cast<std::size_t>(z)];
    out.z.push_back(z);
    out.x.push_back(x);
    out.y.push_back(rng.sample(GaussianDensity(obs.mean_at(x), obs.cov)));
  }
  return out;
}

}  // namespace vse
