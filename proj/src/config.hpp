// TOML run configuration.
#ifndef VSE_CONFIG_HPP
#define VSE_CONFIG_HPP

#include "staircase.hpp"

#include <filesystem>
#include <string>

namespace vse {

struct RunConfig {
  StaircaseConfig staircase;
  unsigned threads = 1;
};

// Keys: m, p, phi0, mu0_rule, sigma0, r, t, trials, seed, smoother_iters,
// threads. M, R and T are accepted in upper case as well. Unknown keys are
// rejected. Throws IoError when the file cannot be read and InputError on
// parse or validation failures.
RunConfig parse_config(const std::string& text, const std::string& source = "<string>");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace vse

#endif  // VSE_CONFIG_HPP
