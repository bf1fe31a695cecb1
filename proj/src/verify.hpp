// Oracle property suite: evidence bounds, pointwise representer bounds, ELBO
// monotonicity and the single-regime reduction to Kalman/RTS, on random jump
// systems small enough for exhaustive enumeration.
#ifndef VSE_VERIFY_HPP
#define VSE_VERIFY_HPP

#include "vjgm.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vse {

struct VerifyOptions {
  std::size_t instances = 20;
  Index max_T = 6;
  Index max_M = 2;
  std::uint64_t seed = 1;
  int smoother_iters = 10;
  std::size_t probes = 100;
  // Negative control: raises every log kappa by one before checking.
  bool inject_violation = false;
};

struct CheckResult {
  std::string name;
  std::size_t evaluated = 0;
  std::size_t failures = 0;
  double worst_excess = 0.0;  // largest amount by which a bound was exceeded
  bool passed() const { return failures == 0; }
};

struct VerifyReport {
  std::size_t instances = 0;
  std::vector<CheckResult> checks;
  bool passed() const;
  std::string table() const;
};

VerifyReport run_verify(const VerifyOptions& options);

}  // namespace vse

#endif  // VSE_VERIFY_HPP
