#pragma once

#include <deque>
#include <vector>

#include "opinion_smc/linalg.hpp"
#include "opinion_smc/rng.hpp"
#include "opinion_smc/state_space.hpp"

namespace opinion_smc {

/// One weighted particle. `history` holds the retained trajectory window,
/// oldest first; the current state is the last entry.
struct Particle {
  std::deque<VectorXd> history;
  double log_weight = 0.0;

  const VectorXd& state() const { return history.back(); }
  /// Appends `next` and drops states beyond `window`.
  void advance(VectorXd next, std::size_t window);
};

/// Weighted ensemble states at one step, taken before resampling.
struct EnsembleSnapshot {
  int t = 0;
  std::vector<VectorXd> states;
  VectorXd log_weights;
};

struct Ensemble {
  std::vector<Particle> particles;
  int t = 0;
  std::vector<int> resample_log;
  std::size_t window = 1;
  std::deque<EnsembleSnapshot> snapshots;

  Index size() const { return static_cast<Index>(particles.size()); }
  VectorXd log_weights() const;
  std::vector<VectorXd> states() const;
  /// Records the current weighted states, keeping at most `window` snapshots.
  void snapshot();
  /// The snapshot taken at step t, or nullptr.
  const EnsembleSnapshot* snapshot_at(int t) const;
};

/// log(sum(exp(v))) with max subtraction; -inf for an all -inf input.
double log_sum_exp(const Eigen::Ref<const VectorXd>& log_values);

/// exp(log_w - logsumexp(log_w)). Throws DegenerateEnsembleError when no
/// weight is finite.
VectorXd normalized_weights(const Eigen::Ref<const VectorXd>& log_weights);

/// (sum w)^2 / sum w^2, evaluated from log-weights.
double ess(const Eigen::Ref<const VectorXd>& log_weights);

/// Systematic resampling with the grid U_j = u + j/S, u in [0, 1/S).
/// Parent i receives #{j : W_{i-1} <= U_j < W_i} offspring, W the running sum.
std::vector<Index> systematic_resample(const Eigen::Ref<const VectorXd>& weights, double u);
std::vector<Index> systematic_resample(const Eigen::Ref<const VectorXd>& weights, Rng& rng);

/// Replaces the particles by their systematic offspring and sets every
/// log-weight to -log S.
void resample(Ensemble& ensemble, Rng& rng);

/// Prior on the initial state, i.i.d. per coordinate.
struct InitialDistribution {
  enum class Kind { kUniformBox, kGaussian };

  Kind kind = Kind::kUniformBox;
  double half_width = 4.0;
  double mean = 0.0;
  double sd = 1.0;

  static InitialDistribution uniform_box(double half_width);
  static InitialDistribution gaussian(double mean, double sd);

  double sample(Rng& rng) const;
  VectorXd sample(Index n, Rng& rng) const;
  double log_density(double x) const;

  friend bool operator==(const InitialDistribution&, const InitialDistribution&) = default;
};

/// Draws from p(x_1 | z_1) under the prior: unobserved coordinates from the
/// prior, observed ones from N(z_1, sigma_xi^2) restricted to the box
/// (uniform prior) or from the conjugate Gaussian (Gaussian prior).
VectorXd sample_initial_posterior(const InitialDistribution& prior, const Eigen::Ref<const VectorXd>& z1,
                                  const ObservationModel& model, Rng& rng);

}  // namespace opinion_smc
