#pragma once

#include <optional>
#include <vector>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/linalg.hpp"

namespace opinion_smc {

/// Result of rolling one state forward until it is clustered.
struct ClusterRoll {
  ClusterSet clusters;
  int steps = 0;
};

/// Iterates the noiseless step until detect_clusters succeeds, checking the
/// starting state first. nullopt when max_steps is reached.
std::optional<ClusterRoll> roll_to_clusters(const OpinionState& state, const InteractionKernel& kernel,
                                            double alpha, int max_steps);

struct ClusterSample {
  double weight = 0.0;  // normalized over all particles
  bool resolved = false;
  int steps = 0;
  ClusterSet clusters;  // empty when unresolved
};

struct ClusterPosterior {
  std::vector<ClusterSample> samples;

  Index unresolved_count() const;
  /// Largest cluster count over resolved samples.
  Index max_rank() const;
};

/// Rolls every particle forward to clustering. Unresolved particles stay in
/// `samples` flagged and are ignored by the rank summaries. Throws
/// PredictionFailure when nothing resolves.
ClusterPosterior predict_clusters(const std::vector<VectorXd>& states, const Eigen::Ref<const VectorXd>& log_weights,
                                  Index dim, const InteractionKernel& kernel, double alpha, int max_steps,
                                  int threads = 1);

struct ClusterEstimate {
  double size = 0.0;
  VectorXd center;
};

/// Weighted mean size and center of the rank-th largest cluster (rank 0 is
/// the largest) over the resolved samples that have that rank, weights
/// renormalized over those samples. Throws MissingRankError if none do.
ClusterEstimate posterior_means(const ClusterPosterior& posterior, Index rank);

/// posterior_means for every rank present in at least one resolved sample.
std::vector<ClusterEstimate> posterior_estimates(const ClusterPosterior& posterior);

/// Estimates read directly off a ClusterSet.
std::vector<ClusterEstimate> estimates_from(const ClusterSet& clusters);

/// 1 if some estimate j has |truth center - center_j| <= L and
/// truth size - K < size_j < truth size + K; for K = 0 the size must match
/// exactly (within 1e-9). Throws MissingRankError if truth lacks the rank.
int success_indicator(const ClusterSet& truth, const std::vector<ClusterEstimate>& estimates, Index rank,
                      double distance_tolerance, double size_tolerance);

/// |truth size - estimated size| at the same rank.
double size_error(const ClusterSet& truth, const std::vector<ClusterEstimate>& estimates, Index rank);

/// Treats the observed agents at T as a standalone system and rolls it to
/// clustering. Partition indices refer to observation order. Sizes are
/// scaled by N / N1 and rounded half to even; centers are unscaled.
/// Throws PredictionFailure when unresolved.
ClusterSet predict_from_observation_only(const Eigen::Ref<const VectorXd>& z_T, Index dim, Index n_agents,
                                         const InteractionKernel& kernel, double alpha, int max_steps);

}  // namespace opinion_smc
