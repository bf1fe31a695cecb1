#include "config.hpp"

#include "serialize.hpp"

#include <toml.hpp>

#include <set>

namespace vse {
namespace {

template <typename T>
T integer_value(const toml::node& node, const std::string& key) {
  const auto v = node.value<std::int64_t>();
  if (!v || !node.is_integer()) throw InputError("config: '" + key + "' must be an integer");
  if (*v < 0) throw InputError("config: '" + key + "' must be non-negative");
  return static_cast<T>(*v);
}

double real_value(const toml::node& node, const std::string& key) {
  if (!node.is_number()) throw InputError("config: '" + key + "' must be a number");
  return *node.value<double>();
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  toml::table table;
  try {
    table = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw InputError("config: " + source + ": " + std::string(e.description()));
  }
  RunConfig cfg;
  auto& s = cfg.staircase;
  std::set<std::string> seen;
  for (const auto& [k, node] : table) {
    std::string key(k.str());
    std::string canon = key;
    if (key == "M") canon = "m";
    if (key == "R") canon = "r";
    if (key == "T") canon = "t";
    if (!seen.insert(canon).second) throw InputError("config: '" + canon + "' given twice");
    if (canon == "m") {
      s.M = integer_value<Index>(node, key);
    } else if (canon == "p") {
      s.p = real_value(node, key);
    } else if (canon == "phi0") {
      s.phi0 = real_value(node, key);
    } else if (canon == "mu0_rule") {
      const auto v = node.value<std::string>();
      if (!v) throw InputError("config: 'mu0_rule' must be a string");
      s.mu0_rule = *v;
    } else if (canon == "sigma0") {
      s.sigma0 = real_value(node, key);
    } else if (canon == "r") {
      s.R = real_value(node, key);
    } else if (canon == "t") {
      s.T = integer_value<Index>(node, key);
    } else if (canon == "trials") {
      s.trials = integer_value<std::size_t>(node, key);
    } else if (canon == "seed") {
      s.seed = integer_value<std::uint64_t>(node, key);
    } else if (canon == "smoother_iters") {
      s.smoother_iters = integer_value<int>(node, key);
    } else if (canon == "threads") {
      cfg.threads = integer_value<unsigned>(node, key);
    } else {
      throw InputError("config: unknown key '" + key + "'");
    }
  }
  s.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path), path.string());
}

}  // namespace vse
