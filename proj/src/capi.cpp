#include "vse/vse.h"

#include "config.hpp"
#include "experiment.hpp"
#include "serialize.hpp"
#include "verify.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <string>

struct vse_config {
  vse::RunConfig cfg;
};

struct vse_paths {
  vse::JumpPaths paths;
};

struct vse_posterior {
  vse::VjgmPosterior post;
  std::optional<std::vector<vse::ProductMarginal>> filtering;
};

struct vse_verify_report {
  vse::VerifyReport report;
  std::string table;
};

namespace {

thread_local std::string g_last_error;

vse_status fail(vse_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
vse_status guarded(F&& body) {
  try {
    body();
    return VSE_OK;
  } catch (const vse::InputError& e) {
    return fail(VSE_ERR_INPUT, e.what());
  } catch (const vse::NumericError& e) {
    return fail(VSE_ERR_NUMERIC, e.what());
  } catch (const vse::IoError& e) {
    return fail(VSE_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VSE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VSE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VSE_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw vse::InputError(std::string(what) + " is NULL");
}

vse::JumpGMSystem system_for(const vse_config* cfg, const vse_paths* paths) {
  require(cfg, "config");
  require(paths, "paths");
  auto s = cfg->cfg.staircase;
  s.T = static_cast<vse::Index>(paths->paths.y.size()) - 1;
  return vse::build_staircase(s);
}

void copy_marginal(const vse::ProductMarginal& q, double* f, double* mean, double* cov) {
  if (f) std::copy(q.f.probs.data(), q.f.probs.data() + q.f.probs.size(), f);
  if (mean) std::copy(q.g.mean.data(), q.g.mean.data() + q.g.mean.size(), mean);
  if (cov) {
    const vse::Index d = q.g.dim();
    for (vse::Index i = 0; i < d; ++i)
      for (vse::Index j = 0; j < d; ++j) cov[i * d + j] = q.g.cov(i, j);
  }
}

}  // namespace

extern "C" {

const char* vse_version(void) { return "0.1.0"; }

const char* vse_last_error(void) { return g_last_error.c_str(); }

const char* vse_status_name(vse_status status) {
  switch (status) {
    case VSE_OK: return "ok";
    case VSE_ERR_INPUT: return "input error";
    case VSE_ERR_NUMERIC: return "numeric error";
    case VSE_ERR_IO: return "io error";
    case VSE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

vse_status vse_config_default(vse_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new vse_config{};
  });
}

vse_status vse_config_load(const char* path, vse_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vse_config{vse::load_config(path)};
  });
}

vse_status vse_config_set_seed(vse_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.staircase.seed = seed;
  });
}

vse_status vse_config_set_trials(vse_config* cfg, size_t trials) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.staircase.trials = trials;
  });
}

vse_status vse_config_set_horizon(vse_config* cfg, int64_t horizon) {
  return guarded([&] {
    require(cfg, "config");
    auto s = cfg->cfg.staircase;
    s.T = horizon;
    s.validate();
    cfg->cfg.staircase = s;
  });
}

vse_status vse_config_set_regimes(vse_config* cfg, int64_t regimes) {
  return guarded([&] {
    require(cfg, "config");
    auto s = cfg->cfg.staircase;
    s.M = regimes;
    s.validate();
    cfg->cfg.staircase = s;
  });
}

vse_status vse_config_set_smoother_iters(vse_config* cfg, int iters) {
  return guarded([&] {
    require(cfg, "config");
    auto s = cfg->cfg.staircase;
    s.smoother_iters = iters;
    s.validate();
    cfg->cfg.staircase = s;
  });
}

vse_status vse_config_set_threads(vse_config* cfg, unsigned threads) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.threads = threads;
  });
}

vse_status vse_config_use_full_scale(vse_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.staircase.use_full_scale();
  });
}

vse_status vse_config_get_seed(const vse_config* cfg, uint64_t* seed) {
  return guarded([&] {
    require(cfg, "config");
    require(seed, "seed");
    *seed = cfg->cfg.staircase.seed;
  });
}

vse_status vse_config_get_trials(const vse_config* cfg, size_t* trials) {
  return guarded([&] {
    require(cfg, "config");
    require(trials, "trials");
    *trials = cfg->cfg.staircase.trials;
  });
}

vse_status vse_config_get_horizon(const vse_config* cfg, int64_t* horizon) {
  return guarded([&] {
    require(cfg, "config");
    require(horizon, "horizon");
    *horizon = cfg->cfg.staircase.T;
  });
}

vse_status vse_config_get_smoother_iters(const vse_config* cfg, int* iters) {
  return guarded([&] {
    require(cfg, "config");
    require(iters, "iters");
    *iters = cfg->cfg.staircase.smoother_iters;
  });
}

vse_status vse_config_get_threads(const vse_config* cfg, unsigned* threads) {
  return guarded([&] {
    require(cfg, "config");
    require(threads, "threads");
    *threads = cfg->cfg.threads;
  });
}

void vse_config_free(vse_config* cfg) { delete cfg; }

vse_status vse_simulate(const vse_config* cfg, uint64_t trial, vse_paths** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    const auto sys = vse::build_staircase(cfg->cfg.staircase);
    *out = new vse_paths{vse::simulate(sys, cfg->cfg.staircase.seed, trial)};
  });
}

vse_status vse_paths_read(const char* path, vse_paths** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vse_paths{vse::parse_paths(vse::read_text(path))};
  });
}

vse_status vse_paths_write(const vse_paths* paths, const char* path) {
  return guarded([&] {
    require(paths, "paths");
    require(path, "path");
    vse::write_text(path, vse::paths_json(paths->paths));
  });
}

vse_status vse_paths_length(const vse_paths* paths, size_t* length) {
  return guarded([&] {
    require(paths, "paths");
    require(length, "length");
    *length = paths->paths.y.size();
  });
}

vse_status vse_paths_observation_dim(const vse_paths* paths, size_t* dim) {
  return guarded([&] {
    require(paths, "paths");
    require(dim, "dim");
    *dim = paths->paths.y.empty() ? 0 : static_cast<size_t>(paths->paths.y.front().size());
  });
}

vse_status vse_paths_observation(const vse_paths* paths, size_t t, double* y) {
  return guarded([&] {
    require(paths, "paths");
    require(y, "y");
    if (t >= paths->paths.y.size()) throw vse::InputError("paths: time index out of range");
    const auto& v = paths->paths.y[t];
    std::copy(v.data(), v.data() + v.size(), y);
  });
}

void vse_paths_free(vse_paths* paths) { delete paths; }

vse_status vse_filter(const vse_config* cfg, const vse_paths* paths, vse_posterior** out) {
  return guarded([&] {
    require(out, "out");
    const auto sys = system_for(cfg, paths);
    const auto filter = vse::suboptimal_filter(sys, paths->paths.y);
    auto result = std::make_unique<vse_posterior>();
    result->post = vse::posterior_from_filter(filter);
    std::vector<vse::ProductMarginal> filtering;
    for (const auto& step : filter.steps) filtering.push_back(step.marginal);
    result->filtering = std::move(filtering);
    *out = result.release();
  });
}

vse_status vse_smooth(const vse_config* cfg, const vse_paths* paths, int iters, vse_posterior** out) {
  return guarded([&] {
    require(out, "out");
    const auto sys = system_for(cfg, paths);
    const auto filter = vse::suboptimal_filter(sys, paths->paths.y);
    *out = new vse_posterior{vse::fixed_point_smoother(sys, paths->paths.y, filter, iters), std::nullopt};
  });
}

vse_status vse_posterior_elbo(const vse_posterior* post, double* elbo) {
  return guarded([&] {
    require(post, "posterior");
    require(elbo, "elbo");
    *elbo = post->post.elbo;
  });
}

vse_status vse_posterior_length(const vse_posterior* post, size_t* length) {
  return guarded([&] {
    require(post, "posterior");
    require(length, "length");
    *length = post->post.marginals.size();
  });
}

vse_status vse_posterior_regimes(const vse_posterior* post, size_t* regimes) {
  return guarded([&] {
    require(post, "posterior");
    require(regimes, "regimes");
    *regimes = static_cast<size_t>(post->post.marginals.front().f.size());
  });
}

vse_status vse_posterior_state_dim(const vse_posterior* post, size_t* dim) {
  return guarded([&] {
    require(post, "posterior");
    require(dim, "dim");
    *dim = static_cast<size_t>(post->post.marginals.front().g.dim());
  });
}

vse_status vse_posterior_marginal(const vse_posterior* post, size_t t, double* f, double* mean, double* cov) {
  return guarded([&] {
    require(post, "posterior");
    if (t >= post->post.marginals.size()) throw vse::InputError("posterior: time index out of range");
    copy_marginal(post->post.marginals[t], f, mean, cov);
  });
}

vse_status vse_posterior_filtering_marginal(const vse_posterior* post, size_t t, double* f, double* mean,
                                            double* cov) {
  return guarded([&] {
    require(post, "posterior");
    if (!post->filtering) throw vse::InputError("posterior: no filtering marginals for a smoother output");
    if (t >= post->filtering->size()) throw vse::InputError("posterior: time index out of range");
    copy_marginal((*post->filtering)[t], f, mean, cov);
  });
}

vse_status vse_posterior_write(const vse_posterior* post, const char* path) {
  return guarded([&] {
    require(post, "posterior");
    require(path, "path");
    vse::write_text(path, vse::posterior_json(post->post, post->filtering ? &*post->filtering : nullptr));
  });
}

void vse_posterior_free(vse_posterior* post) { delete post; }

vse_status vse_experiment_run(const vse_config* cfg, const char* out_dir, unsigned threads) {
  return guarded([&] {
    require(cfg, "config");
    require(out_dir, "out_dir");
    const auto result = vse::run_experiment(cfg->cfg.staircase, threads == 0 ? cfg->cfg.threads : threads);
    vse::write_experiment(result, out_dir);
  });
}

vse_verify_options vse_verify_defaults(void) {
  const vse::VerifyOptions d;
  return vse_verify_options{d.instances, d.max_T, d.max_M, d.seed, 0};
}

vse_status vse_verify(const vse_verify_options* options, vse_verify_report** out) {
  return guarded([&] {
    require(options, "options");
    require(out, "out");
    vse::VerifyOptions o;
    o.instances = options->instances;
    o.max_T = options->max_T;
    o.max_M = options->max_M;
    o.seed = options->seed;
    o.inject_violation = options->inject_violation != 0;
    auto report = vse::run_verify(o);
    auto table = report.table();
    *out = new vse_verify_report{std::move(report), std::move(table)};
  });
}

int vse_verify_report_passed(const vse_verify_report* report) { return report && report->report.passed() ? 1 : 0; }

size_t vse_verify_report_checks(const vse_verify_report* report) { return report ? report->report.checks.size() : 0; }

const char* vse_verify_report_table(const vse_verify_report* report) { return report ? report->table.c_str() : ""; }

void vse_verify_report_free(vse_verify_report* report) { delete report; }

}  // extern "C"
