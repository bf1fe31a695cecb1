// Deterministic random numbers and random model instances for tests and the
// verification suite.
#ifndef VSE_RANDOM_SYSTEMS_HPP
#define VSE_RANDOM_SYSTEMS_HPP

#include "exact_inference.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace vse {

// mt19937_64 keyed by a list of integers (seed, trial, stream, ...). Uniforms
// and normals are derived from the raw 64-bit output here rather than through
// std distributions, whose algorithms differ between standard libraries.
class Rng {
 public:
  Rng(std::initializer_list<std::uint64_t> key);

  std::uint64_t bits() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // in [0, 1)
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }
  Vector normal(Index n);
  Vector sample(const GaussianDensity& g);
  Index categorical(const Vector& probs);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix random_spd(Rng& rng, Index d, double min_eig, double max_eig);

LinearGaussianSystem random_linear_system(Rng& rng, Index d, Index horizon);
Observations sample_observations(const LinearGaussianSystem& sys, Rng& rng);

// Random dense chain, kernels and observation models; every regime gets a
// distinct model so the mixture is not degenerate.
JumpGMSystem random_jump_system(Rng& rng, Index regimes, Index d, Index horizon);

struct JumpPaths {
  std::vector<Index> z;
  std::vector<Vector> x;
  Observations y;
};

JumpPaths sample_paths(const JumpGMSystem& sys, Rng& rng);

}  // namespace vse

#endif  // VSE_RANDOM_SYSTEMS_HPP
