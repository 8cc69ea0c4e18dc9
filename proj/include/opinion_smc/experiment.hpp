#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opinion_smc/config.hpp"
#include "opinion_smc/filter.hpp"
#include "opinion_smc/predict.hpp"

namespace opinion_smc {

struct Truth {
  std::vector<VectorXd> trajectory;    // x_1..x_T
  std::vector<VectorXd> observations;  // z_1..z_T
  ClusterSet clusters;
  int clustering_steps = 0;  // steps from x_1 to the clustered state
  int attempts = 1;          // initial conditions drawn, including the accepted one
};

/// Streams for run r of an experiment seeded with `seed`.
StreamTree run_streams(std::uint64_t seed, int run);

/// Draws x_1 ~ Unif([-b, b]^{dN}) until the noiseless roll clusters into at
/// least two clusters within max_predict_steps, then records T states and
/// the observations z_t = Hx_t + sigma_xi_truth * noise. Throws ConfigError
/// after 100 rejections.
Truth generate_truth(const ExperimentConfig& config, const StreamTree& streams);

struct RunMetrics {
  std::array<std::array<int, 3>, 2> omega{};  // [rank][K]
  std::array<double, 2> size_error{};         // NaN when the rank is missing
};

/// Omega for ranks 0, 1 and K in {0, 1, 2} with L = 0.1, and e_1, e_2.
RunMetrics evaluate(const ClusterSet& truth, const std::vector<ClusterEstimate>& estimates);

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  Truth truth;
  FilterResult filter;
  std::optional<ClusterPosterior> posterior;
  std::vector<ClusterEstimate> estimates;
  RunMetrics metrics;
  std::optional<ClusterSet> observation_only;
  std::optional<RunMetrics> observation_only_metrics;
  double truth_seconds = 0.0;
  double filter_seconds = 0.0;
  double predict_seconds = 0.0;
};

enum class Stage { kTruth, kFilter, kPredict };

/// Runs the pipeline up to `stage` for run index `run`. `debug_dump` records
/// particle 0's proposal internals at every step.
RunResult run_single(const ExperimentConfig& config, int run = 0, Stage stage = Stage::kPredict,
                     bool debug_dump = false);

/// Writes `<dir>/{config.toml, manifest.json, truth.csv, obs.csv}` and,
/// when present, `ess.csv`, `particles.csv`, `report.json`, `debug.csv`.
void write_run(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result,
               Stage stage);

/// Deterministic report.json contents.
std::string report_json(const ExperimentConfig& config, const RunResult& result);

struct BatchSummary {
  int runs = 0;
  int completed = 0;
  std::vector<std::string> failures;
  bool degraded = false;
};

/// Runs config.runs independent pipelines over config.threads workers and
/// writes `<out>/run-XXXX/`, `<out>/batch.csv` and `<out>/summary.json`.
BatchSummary run_batch(const ExperimentConfig& config, const std::filesystem::path& out);

}  // namespace opinion_smc
