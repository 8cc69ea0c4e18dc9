#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/ensemble.hpp"
#include "opinion_smc/importance.hpp"
#include "opinion_smc/moves.hpp"
#include "opinion_smc/rng.hpp"
#include "opinion_smc/state_space.hpp"

namespace opinion_smc {

enum class Method {
  kSir,                ///< bootstrap proposal with tempered likelihood weights
  kImplicit,           ///< one-step optimal proposal
  kAuxiliaryImplicit,  ///< two-observation proposal with look-ahead weights and moves
};

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

struct FilterConfig {
  Method method = Method::kAuxiliaryImplicit;
  Index n_particles = 100;
  double alpha = 0.05;
  double resample_threshold_fraction = 2.0 / 3.0;
  double sir_temperature = 2.0;
  JacobianVariant jacobian = JacobianVariant::kFull;
  Lookahead lookahead = Lookahead::kPredictive;
  InitialDistribution prior;
  bool moves_enabled = true;
  MoveConfig moves;
  int threads = 1;
  bool debug_dump = false;

  void validate() const;
};

/// Proposal internals of particle 0 at one step.
struct DebugRow {
  int t = 0;
  VectorXd map_point;
  VectorXd mean;
  VectorXd precision_diagonal;
};

struct FilterResult {
  Ensemble ensemble;
  /// ESS after weighting at t = 1..T, before any resampling.
  std::vector<double> ess_trace;
  std::vector<int> resample_steps;
  std::vector<MoveEvent> move_events;
  std::vector<std::string> warnings;
  std::vector<DebugRow> debug;
};

/// Bootstrap step: x_t ~ N(g(x_{t-1}), sigma_eps^2 I), log-weight increment
/// log p(z_t|x_t) / temperature. Particle s draws from `streams` at (t, s).
void sir_step(Ensemble& ensemble, const VectorXd& z_t, const ObservationModel& model,
              const InteractionKernel& kernel, double alpha, double temperature, const StreamTree& streams,
              int threads = 1);

/// Runs the chosen filter over z_1..z_T (observations[t-1] = z_t).
///
/// Particles start from p(x_1|z_1) with uniform weights. Whenever the ESS
/// drops below resample_threshold_fraction * S the ensemble is resampled;
/// for the auxiliary method with moves enabled the local-trajectory move
/// runs just before resampling and the directional and information moves
/// right after. Throws FilterFailure if every weight vanishes.
FilterResult run_filter(const std::vector<VectorXd>& observations, const ObservationModel& model,
                        const InteractionKernel& kernel, const FilterConfig& config, const StreamTree& streams);

}  // namespace opinion_smc
