// The autoregressive staircase: M stationary AR(1) processes with means
// 0, 1, ..., M-1 driven by a nearest-neighbour regime chain.
#ifndef VSE_STAIRCASE_HPP
#define VSE_STAIRCASE_HPP

#include "random_systems.hpp"

#include <cstdint>
#include <string>

namespace vse {

struct StaircaseConfig {
  Index M = 4;
  double p = 0.9;
  double phi0 = 0.5;
  std::string mu0_rule = "z_minus_1";
  double sigma0 = 0.5;
  double R = 1.0;
  Index T = 129;
  std::size_t trials = 100;
  std::uint64_t seed = 20240611;
  int smoother_iters = 10;

  void validate() const;
  // T = 513, 1000 trials.
  void use_full_scale();
};

JumpGMSystem build_staircase(const StaircaseConfig& cfg);

// Ancestral sample keyed by (seed, trial).
JumpPaths simulate(const JumpGMSystem& sys, std::uint64_t seed, std::uint64_t trial = 0);

}  // namespace vse

#endif  // VSE_STAIRCASE_HPP
