// Monte Carlo comparison on the staircase model: IMM and VJGM(0) filtering,
// VJGM(0) and VJGM(k) smoothing.
#ifndef VSE_EXPERIMENT_HPP
#define VSE_EXPERIMENT_HPP

#include "metrics.hpp"
#include "staircase.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vse {

struct MetricsRow {
  std::size_t trial = 0;
  std::string method;  // imm, vjgm0, vjgm<k>
  std::string mode;    // filtering, smoothing
  TrialMetrics metrics;
  std::optional<double> elbo;
  bool failed = false;
  std::string error;
};

struct ExperimentResult {
  StaircaseConfig config;
  std::vector<MetricsRow> rows;  // four per trial, in trial order
};

// Rows of a single trial; failures are recorded in the rows, not thrown.
std::vector<MetricsRow> run_trial(const JumpGMSystem& sys, const StaircaseConfig& cfg, std::size_t trial,
                                  const VjgmOptions& options = {});

// Trials are spread over `threads` workers (0 picks the hardware count); the
// result does not depend on the thread count.
ExperimentResult run_experiment(const StaircaseConfig& cfg, unsigned threads = 1,
                                const VjgmOptions& options = {});

std::string metrics_csv(const ExperimentResult& result);
std::string summary_json(const ExperimentResult& result);

// Writes metrics.csv and summary.json into out_dir, creating it if needed.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir);

}  // namespace vse

#endif  // VSE_EXPERIMENT_HPP
