#include "staircase.hpp"

#include <cmath>

namespace vse {
namespace {
constexpr std::uint64_t kPathStream = 1;
}

void StaircaseConfig::validate() const {
  if (M < 1) throw InputError("staircase: M must be at least 1");
  if (!(p > 0.0 && p < 1.0)) throw InputError("staircase: p must lie in (0, 1)");
  if (!(std::abs(phi0) < 1.0)) throw InputError("staircase: |phi0| must be below 1");
  if (!(sigma0 > 0.0)) throw InputError("staircase: sigma0 must be positive");
  if (!(R > 0.0)) throw InputError("staircase: R must be positive");
  if (T < 0) throw InputError("staircase: T must be non-negative");
  if (mu0_rule != "z_minus_1") throw InputError("staircase: unknown mu0_rule '" + mu0_rule + "'");
  if (smoother_iters < 0) throw InputError("staircase: smoother_iters must be non-negative");
}

void StaircaseConfig::use_full_scale() {
  T = 513;
  trials = 1000;
}

JumpGMSystem build_staircase(const StaircaseConfig& cfg) {
  cfg.validate();
  const Index M = cfg.M;
  Matrix lambda = Matrix::Zero(M, M);
  if (M == 1) {
    lambda(0, 0) = 1.0;
  } else {
    for (Index j = 0; j < M; ++j) {
      lambda(j, j) = cfg.p;
      if (j == 0) {
        lambda(1, 0) = 1.0 - cfg.p;
      } else if (j == M - 1) {
        lambda(M - 2, j) = 1.0 - cfg.p;
      } else {
        lambda(j - 1, j) = 0.5 * (1.0 - cfg.p);
        lambda(j + 1, j) = 0.5 * (1.0 - cfg.p);
      }
    }
  }
  JumpGMSystem sys;
  sys.chain_init = Categorical::uniform(M);
  sys.chain_kernel = CategoricalKernel(lambda);
  const double var0 = cfg.sigma0 * cfg.sigma0;
  const Matrix q = Matrix::Constant(1, 1, (1.0 - cfg.phi0 * cfg.phi0) * var0);
  for (Index z = 0; z < M; ++z) {
    const double mu = static_cast<double>(z);  // z - 1 with 1-based regimes
    sys.state_init.emplace_back(Vector::Constant(1, mu), Matrix::Constant(1, 1, var0));
    sys.state_kernels.emplace_back(Matrix::Constant(1, 1, cfg.phi0), Vector::Constant(1, (1.0 - cfg.phi0) * mu), q);
    sys.obs_kernels.emplace_back(Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Constant(1, 1, cfg.R));
  }
  sys.horizon = cfg.T;
  sys.validate();
  return sys;
}

JumpPaths simulate(const JumpGMSystem& sys, std::uint64_t seed, std::uint64_t trial) {
  Rng rng{seed, trial, kPathStream};
  return sample_paths(sys, rng);
}

}  // namespace vse
