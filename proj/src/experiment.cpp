#include "experiment.hpp"

#include "serialize.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <map>
#include <thread>

namespace vse {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  const double n = static_cast<double>(v.size());
  for (double x : v) m.mean += x;
  m.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return m;
}

nlohmann::json moments_json(const std::vector<double>& v) {
  const auto m = moments(v);
  return {{"mean", m.mean}, {"std_error", m.std_error}, {"n", v.size()}};
}

}  // namespace

std::vector<MetricsRow> run_trial(const JumpGMSystem& sys, const StaircaseConfig& cfg, std::size_t trial,
                                  const VjgmOptions& options) {
  const std::string smoother = "vjgm" + std::to_string(cfg.smoother_iters);
  std::vector<MetricsRow> rows{{trial, "imm", "filtering", {}, std::nullopt, false, {}},
                               {trial, "vjgm0", "filtering", {}, std::nullopt, false, {}},
                               {trial, "vjgm0", "smoothing", {}, std::nullopt, false, {}},
                               {trial, smoother, "smoothing", {}, std::nullopt, false, {}}};
  const auto fail_from = [&](std::size_t first, const std::exception& e) {
    for (std::size_t i = first; i < rows.size(); ++i) {
      rows[i].failed = true;
      rows[i].error = e.what();
      rows[i].elbo.reset();
    }
  };

  const JumpPaths truth = simulate(sys, cfg.seed, trial);
  try {
    const auto imm = imm_filter(sys, truth.y);
    rows[0].metrics = filtering_metrics(truth, imm.regime_probs, imm.moments);
  } catch (const std::exception& e) {
    rows[0].failed = true;
    rows[0].error = e.what();
  }
  try {
    const auto filter = suboptimal_filter(sys, truth.y, options);
    std::vector<Categorical> f;
    std::vector<GaussianDensity> g;
    for (const auto& step : filter.steps) {
      f.push_back(step.marginal.f);
      g.push_back(step.marginal.g);
    }
    rows[1].metrics = filtering_metrics(truth, f, g);
    rows[1].elbo = filter.log_evidence_bound();
    const auto post0 = posterior_from_filter(filter);
    rows[2].metrics = smoothing_metrics(truth, post0);
    rows[2].elbo = post0.elbo;
    try {
      const auto postk = fixed_point_smoother(sys, truth.y, filter, cfg.smoother_iters, options);
      rows[3].metrics = smoothing_metrics(truth, postk);
      rows[3].elbo = postk.elbo;
    } catch (const std::exception& e) {
      fail_from(3, e);
    }
  } catch (const std::exception& e) {
    fail_from(1, e);
  }
  return rows;
}

ExperimentResult run_experiment(const StaircaseConfig& cfg, unsigned threads, const VjgmOptions& options) {
  const JumpGMSystem sys = build_staircase(cfg);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(cfg.trials, 1)));

  std::vector<std::vector<MetricsRow>> per_trial(cfg.trials);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfg.trials; i = next++) per_trial[i] = run_trial(sys, cfg, i, options);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  ExperimentResult out{cfg, {}};
  for (auto& rows : per_trial) {
    for (auto& r : rows) out.rows.push_back(std::move(r));
  }
  return out;
}

std::string metrics_csv(const ExperimentResult& result) {
  std::string out = "trial,method,mode,rmse_x,accuracy_z,log_odds_z,chi2,elbo,failed\n";
  for (const auto& r : result.rows) {
    out += std::to_string(r.trial) + ',' + r.method + ',' + r.mode + ',';
    if (r.failed) {
      out += ",,,,,1\n";
      continue;
    }
    const auto& m = r.metrics;
    out += format_double(m.rmse_x) + ',' + format_double(m.accuracy_z) + ',' + format_double(m.log_odds_z) +
           ',' + format_double(m.chi2) + ',' + (r.elbo ? format_double(*r.elbo) : std::string()) + ",0\n";
  }
  return out;
}

std::string summary_json(const ExperimentResult& result) {
  const auto& cfg = result.config;
  nlohmann::ordered_json doc;
  doc["metadata"] = {{"M", cfg.M},
                     {"p", cfg.p},
                     {"phi0", cfg.phi0},
                     {"mu0_rule", cfg.mu0_rule},
                     {"sigma0", cfg.sigma0},
                     {"R", cfg.R},
                     {"T", cfg.T},
                     {"trials", cfg.trials},
                     {"seed", cfg.seed},
                     {"smoother_iters", cfg.smoother_iters},
                     {"chi2_df", cfg.T + 1},
                     {"log_base", "e"},
                     {"probability_floor", kProbabilityFloor}};

  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricsRow*>> groups;
  for (const auto& r : result.rows) {
    const std::string key = r.method + "/" + r.mode;
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  nlohmann::ordered_json methods = nlohmann::ordered_json::object();
  for (const auto& key : order) {
    std::vector<double> rmse, acc, odds, chi2, elbo;
    std::size_t failed = 0;
    for (const auto* r : groups[key]) {
      if (r->failed) {
        ++failed;
        continue;
      }
      rmse.push_back(r->metrics.rmse_x);
      acc.push_back(r->metrics.accuracy_z);
      odds.push_back(r->metrics.log_odds_z);
      chi2.push_back(r->metrics.chi2);
      if (r->elbo) elbo.push_back(*r->elbo);
    }
    nlohmann::ordered_json entry;
    entry["method"] = groups[key].front()->method;
    entry["mode"] = groups[key].front()->mode;
    entry["failed"] = failed;
    entry["rmse_x"] = moments_json(rmse);
    entry["accuracy_z"] = moments_json(acc);
    entry["log_odds_z"] = moments_json(odds);
    entry["chi2"] = moments_json(chi2);
    if (!elbo.empty()) entry["elbo"] = moments_json(elbo);
    methods[key] = entry;
  }
  doc["methods"] = methods;

  // ELBO(VJGM(k)) - ELBO(VJGM(0)) per trial, over trials where both succeeded.
  std::vector<double> gain;
  for (std::size_t i = 0; i + 3 < result.rows.size(); i += 4) {
    const auto& base = result.rows[i + 1];
    const auto& smooth = result.rows[i + 3];
    if (base.elbo && smooth.elbo) gain.push_back(*smooth.elbo - *base.elbo);
  }
  auto improvement = nlohmann::ordered_json(moments_json(gain));
  improvement["min"] = gain.empty() ? 0.0 : *std::min_element(gain.begin(), gain.end());
  improvement["max"] = gain.empty() ? 0.0 : *std::max_element(gain.begin(), gain.end());
  improvement["values"] = gain;
  doc["elbo_improvement"] = improvement;
  return doc.dump(2) + "\n";
}

void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  write_text(out_dir / "metrics.csv", metrics_csv(result));
  write_text(out_dir / "summary.json", summary_json(result));
}

}  // namespace vse
