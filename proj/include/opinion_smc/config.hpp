#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/filter.hpp"
#include "opinion_smc/importance.hpp"
#include "opinion_smc/moves.hpp"
#include "opinion_smc/state_space.hpp"

namespace opinion_smc {

/// Everything needed to reproduce one experiment. Defaults are the noiseless
/// N = 60 setting.
struct ExperimentConfig {
  Index n_agents = 60;
  Index dim = 2;
  Index n_observed = 30;
  double alpha = 0.05;
  InteractionKernel kernel = InteractionKernel::piecewise_default();
  int horizon = 300;
  Index n_particles = 100;
  double sigma_eps = 0.01;
  double sigma_xi_truth = 0.0;
  double sigma_xi_filter = 0.005;
  Method method = Method::kAuxiliaryImplicit;
  std::uint64_t seed = 1;
  double resample_threshold_fraction = 2.0 / 3.0;
  double sir_temperature = 2.0;
  JacobianVariant jacobian = JacobianVariant::kFull;
  Lookahead lookahead = Lookahead::kPredictive;
  double initial_box = 4.0;
  bool moves_enabled = true;
  MoveConfig moves;
  int runs = 1;
  std::string out = "runs";
  int threads = 1;
  int max_predict_steps = 20000;

  /// Throws ConfigError on any inconsistent setting.
  void validate() const;

  ObservationModel truth_model() const;
  ObservationModel filter_model() const;
  FilterConfig filter_config() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses TOML text. Missing keys keep their defaults; unknown keys are
/// rejected. Throws ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// TOML with every key written out; parse_config inverts it exactly.
std::string serialize_config(const ExperimentConfig& config);
/// FNV-1a of serialize_config.
std::uint64_t config_hash(const ExperimentConfig& config);

/// off: noiseless truth, sigma_xi_filter = 0.005, sigma_eps = 0.01.
/// on: sigma_xi = 0.01 in truth and filter, sigma_eps = 0.05.
void apply_noise_preset(ExperimentConfig& config, bool noisy);
/// N1 = round(ratio * N).
void apply_observation_ratio(ExperimentConfig& config, double ratio);

}  // namespace opinion_smc
