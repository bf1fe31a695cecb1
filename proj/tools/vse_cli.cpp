// vse: simulate, filter, smooth, experiment and verify subcommands.
// Exit codes: 0 success, 1 property failure, 2 usage, input or IO error.
#include "vse/vse.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitProperty = 1;
constexpr int kExitError = 2;

struct Failure {
  int code;
};

bool g_verbose = false;

void check(vse_status status, const char* what) {
  if (status == VSE_OK) return;
  std::fprintf(stderr, "vse: %s: %s: %s\n", what, vse_status_name(status), vse_last_error());
  throw Failure{kExitError};
}

void info(const std::string& msg) {
  if (g_verbose) std::fprintf(stderr, "vse: %s\n", msg.c_str());
}

struct ConfigHandle {
  vse_config* ptr = nullptr;
  ~ConfigHandle() { vse_config_free(ptr); }
};

struct PathsHandle {
  vse_paths* ptr = nullptr;
  ~PathsHandle() { vse_paths_free(ptr); }
};

struct PosteriorHandle {
  vse_posterior* ptr = nullptr;
  ~PosteriorHandle() { vse_posterior_free(ptr); }
};

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::optional<uint64_t> seed;
  std::optional<int> iters;
  std::optional<size_t> trials;
  std::optional<unsigned> threads;
  bool full_scale = false;
};

void load_config(const CommonFlags& flags, ConfigHandle& cfg) {
  if (flags.config.empty()) {
    check(vse_config_default(&cfg.ptr), "config");
  } else {
    check(vse_config_load(flags.config.c_str(), &cfg.ptr), "config");
  }
  if (flags.full_scale) check(vse_config_use_full_scale(cfg.ptr), "config");
  if (flags.seed) check(vse_config_set_seed(cfg.ptr, *flags.seed), "config");
  if (flags.trials) check(vse_config_set_trials(cfg.ptr, *flags.trials), "config");
  if (flags.iters) check(vse_config_set_smoother_iters(cfg.ptr, *flags.iters), "config");
  if (flags.threads) check(vse_config_set_threads(cfg.ptr, *flags.threads), "config");
}

std::string prepare_out(const std::string& dir, const char* file) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    std::fprintf(stderr, "vse: cannot create output directory '%s'\n", dir.c_str());
    throw Failure{kExitError};
  }
  return (std::filesystem::path(dir) / file).string();
}

int cmd_simulate(const CommonFlags& flags) {
  ConfigHandle cfg;
  load_config(flags, cfg);
  PathsHandle paths;
  check(vse_simulate(cfg.ptr, 0, &paths.ptr), "simulate");
  const auto file = prepare_out(flags.out, "paths.json");
  check(vse_paths_write(paths.ptr, file.c_str()), "simulate");
  info("wrote " + file);
  return kExitOk;
}

int cmd_estimate(const CommonFlags& flags, const std::string& data, bool smooth) {
  ConfigHandle cfg;
  load_config(flags, cfg);
  PathsHandle paths;
  check(vse_paths_read(data.c_str(), &paths.ptr), "data");
  PosteriorHandle post;
  if (smooth) {
    int iters = 0;
    check(vse_config_get_smoother_iters(cfg.ptr, &iters), "config");
    check(vse_smooth(cfg.ptr, paths.ptr, iters, &post.ptr), "smooth");
  } else {
    check(vse_filter(cfg.ptr, paths.ptr, &post.ptr), "filter");
  }
  const auto file = prepare_out(flags.out, "posterior.json");
  check(vse_posterior_write(post.ptr, file.c_str()), "write");
  info("wrote " + file);
  double elbo = 0.0;
  check(vse_posterior_elbo(post.ptr, &elbo), "elbo");
  std::printf("%.17g\n", elbo);
  return kExitOk;
}

int cmd_experiment(const CommonFlags& flags) {
  ConfigHandle cfg;
  load_config(flags, cfg);
  prepare_out(flags.out, "metrics.csv");
  size_t trials = 0;
  int64_t horizon = 0;
  check(vse_config_get_trials(cfg.ptr, &trials), "config");
  check(vse_config_get_horizon(cfg.ptr, &horizon), "config");
  info("running " + std::to_string(trials) + " trials, T = " + std::to_string(horizon));
  check(vse_experiment_run(cfg.ptr, flags.out.c_str(), 0), "experiment");
  info("wrote metrics.csv and summary.json to " + flags.out);
  return kExitOk;
}

int cmd_verify(const vse_verify_options& options) {
  if (options.instances == 0) {
    std::fprintf(stderr, "vse: warning: instances = 0, no checks run\n");
    return kExitOk;
  }
  vse_verify_report* report = nullptr;
  check(vse_verify(&options, &report), "verify");
  std::fputs(vse_verify_report_table(report), stdout);
  const bool passed = vse_verify_report_passed(report) != 0;
  vse_verify_report_free(report);
  std::printf("%s\n", passed ? "all checks passed" : "property violations found");
  return passed ? kExitOk : kExitProperty;
}

void add_config_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "TOML configuration file");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--seed", flags.seed, "override the configured seed");
  cmd->add_option("--iters", flags.iters, "override the smoother iteration count");
  cmd->add_option("--trials", flags.trials, "override the number of trials");
  cmd->add_option("--threads", flags.threads, "worker threads for the experiment (0 = all cores)");
  cmd->add_flag("--full-scale", flags.full_scale, "T = 513 and 1000 trials");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational state estimation for jump Gauss-Markov systems"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", g_verbose, "progress messages on stderr");
  app.set_version_flag("--version", vse_version());

  CommonFlags flags;
  std::string data;
  vse_verify_options verify = vse_verify_defaults();
  bool inject = false;

  auto* simulate = app.add_subcommand("simulate", "sample regime, state and observation paths");
  add_config_flags(simulate, flags);
  auto* filter = app.add_subcommand("filter", "run VJGM(0) on observed data");
  add_config_flags(filter, flags);
  filter->add_option("--data", data, "paths JSON with at least \"y\"")->required();
  auto* smooth = app.add_subcommand("smooth", "run VJGM(k) on observed data");
  add_config_flags(smooth, flags);
  smooth->add_option("--data", data, "paths JSON with at least \"y\"")->required();
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo comparison on the staircase model");
  add_config_flags(experiment, flags);
  auto* verify_cmd = app.add_subcommand("verify", "oracle property suite on random small systems");
  verify_cmd->add_option("--instances", verify.instances, "number of random systems");
  verify_cmd->add_option("--max-T", verify.max_T, "largest horizon");
  verify_cmd->add_option("--max-M", verify.max_M, "largest number of regimes");
  verify_cmd->add_option("--seed", verify.seed, "instance seed");
  verify_cmd->add_flag("--inject-violation", inject, "negative control: inflate every log kappa");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(flags);
    if (filter->parsed()) return cmd_estimate(flags, data, false);
    if (smooth->parsed()) return cmd_estimate(flags, data, true);
    if (experiment->parsed()) return cmd_experiment(flags);
    verify.inject_violation = inject ? 1 : 0;
    return cmd_verify(verify);
  } catch (const Failure& f) {
    return f.code;
  }
}
