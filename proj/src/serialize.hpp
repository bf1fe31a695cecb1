// File IO and the JSON documents exchanged by the command-line tool.
#ifndef VSE_SERIALIZE_HPP
#define VSE_SERIALIZE_HPP

#include "random_systems.hpp"
#include "vjgm.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace vse {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void ensure_directory(const std::filesystem::path& dir);

// {"z": [...], "x": [...], "y": [...]}, regimes 1-based. Scalar states and
// observations are written as plain numbers, vectors as arrays.
std::string paths_json(const JumpPaths& paths);

// Parses a paths document. Only "y" is required; missing z/x stay empty.
// Throws InputError on malformed content.
JumpPaths parse_paths(const std::string& text);

// Posterior document; `filtering` adds the per-step filtering marginals under
// "filter_f", "filter_g_mean" and "filter_g_cov".
std::string posterior_json(const VjgmPosterior& posterior,
                           const std::vector<ProductMarginal>* filtering = nullptr);

}  // namespace vse

#endif  // VSE_SERIALIZE_HPP
