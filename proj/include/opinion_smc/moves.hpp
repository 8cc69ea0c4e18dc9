#pragma once

#include <string_view>
#include <vector>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/ensemble.hpp"
#include "opinion_smc/importance.hpp"
#include "opinion_smc/rng.hpp"
#include "opinion_smc/state_space.hpp"

namespace opinion_smc {

enum class MoveAcceptance {
  /// Metropolis-Hastings on p(x|x_prev) p(z_t|x) p(z_next|g(x)) with the
  /// proposal ratio.
  kTarget,
  /// min{1, p(z_t|x~)/p(z_t|x)} only.
  kObservation,
};

std::string_view to_string(MoveAcceptance acceptance);
MoveAcceptance parse_move_acceptance(std::string_view name);

struct MoveConfig {
  double beta = 0.2;
  int local_window = 10;  // T0
  int backtrack = 10;     // t0
  double tolerance_fraction = 0.3;
  int max_info_retries = 50;
  int gd_iters = 10;
  MoveAcceptance acceptance = MoveAcceptance::kTarget;

  void validate() const;
  friend bool operator==(const MoveConfig&, const MoveConfig&) = default;
};

struct MoveStats {
  int attempted = 0;
  int accepted = 0;
  int draws = 0;
  int exhausted = 0;

  MoveStats& operator+=(const MoveStats& other);
};

/// Move counts at one resampling event.
struct MoveEvent {
  int t = 0;
  MoveStats directional;
  MoveStats local;
  MoveStats information;
};

/// Read-only inputs shared by the moves at step t.
struct MoveContext {
  const std::vector<VectorXd>* observations = nullptr;  // z_1..z_T at [0, T)
  const ObservationModel* model = nullptr;
  const InteractionKernel* kernel = nullptr;
  double alpha = 0.05;
  JacobianVariant jacobian = JacobianVariant::kFull;
  Lookahead lookahead = Lookahead::kPredictive;
  InitialDistribution prior;
  MoveConfig config;
  int t = 0;

  int horizon() const { return static_cast<int>(observations->size()); }
  const VectorXd& z(int step) const { return (*observations)[static_cast<std::size_t>(step - 1)]; }
  /// z_{step+1}, or nullptr at the horizon.
  const VectorXd* z_after(int step) const { return step < horizon() ? &z(step + 1) : nullptr; }
  Index moved_agents() const;
};

/// Moves floor(beta * N2) randomly chosen unobserved agents, one at a time:
/// a few Gauss-Newton gradient steps on |z_next - Hg(x)|^2 over the agent's
/// coordinates give x*_k, then a candidate is drawn from
/// N(x*_k, (J_k J_k^T / sigma_xi^2 + 1e-8 I)^-1). Weight unchanged.
/// Needs z_{t+1}; does nothing at the horizon.
MoveStats directional_move(Particle& particle, const MoveContext& ctx, Rng& rng);

/// Replaces low-weight particles. c_t is the 25th percentile of the
/// normalized weights; particle s is selected with probability
/// max{0, 1 - w_s/c_t}. A selected particle is regrown from an anchor drawn
/// out of the weighted snapshot at t - T0 with m unobserved agents redrawn
/// from the prior, followed by one auxiliary-proposal pass to t. Accepted
/// replacements take weight c_t. Runs on the pre-resampling ensemble.
MoveStats local_trajectory_move(Ensemble& ensemble, const MoveContext& ctx, const StreamTree& streams,
                                int threads);

/// True when the particle violates radius contraction over the last t0
/// steps or has unobserved agents cut off from every observed agent.
bool needs_information_move(const Particle& particle, const MoveContext& ctx);

/// Redraws a flagged particle from the auxiliary proposal until the draw is
/// physical and connected and passes min{1, p(z_t|x~)/p(z_t|x)}, up to
/// max_info_retries draws. On exhaustion the particle is kept and the
/// returned stats count one exhausted attempt.
MoveStats information_move(Particle& particle, const MoveContext& ctx, Rng& rng);

}  // namespace opinion_smc
