#include "opinion_smc/predict.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>

#include "opinion_smc/ensemble.hpp"
#include "opinion_smc/errors.hpp"
#include "opinion_smc/parallel.hpp"

namespace opinion_smc {

std::optional<ClusterRoll> roll_to_clusters(const OpinionState& state, const InteractionKernel& kernel,
                                            double alpha, int max_steps) {
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (max_steps < 0) throw InputError("step cap must be nonnegative");
  const double radius = kernel.support_radius();
  VectorXd x = state.positions();
  for (int steps = 0;; ++steps) {
    if (auto clusters = detect_clusters(OpinionState(x, state.dim()), radius)) return ClusterRoll{std::move(*clusters), steps};
    if (steps == max_steps) return std::nullopt;
    x = step(x, state.dim(), kernel, alpha);
  }
}

Index ClusterPosterior::unresolved_count() const {
  return std::count_if(samples.begin(), samples.end(), [](const ClusterSample& s) { return !s.resolved; });
}

Index ClusterPosterior::max_rank() const {
  Index out = 0;
  for (const auto& s : samples)
    if (s.resolved) out = std::max(out, s.clusters.n_clusters());
  return out;
}

ClusterPosterior predict_clusters(const std::vector<VectorXd>& states, const Eigen::Ref<const VectorXd>& log_weights,
                                  Index dim, const InteractionKernel& kernel, double alpha, int max_steps,
                                  int threads) {
  if (states.empty() || static_cast<Index>(states.size()) != log_weights.size())
    throw InputError("need one log-weight per state");
  const VectorXd w = normalized_weights(log_weights);
  ClusterPosterior posterior;
  posterior.samples.resize(states.size());
  parallel_for(static_cast<Index>(states.size()), threads, [&](Index s) {
    ClusterSample& sample = posterior.samples[static_cast<std::size_t>(s)];
    sample.weight = w(s);
    if (auto roll = roll_to_clusters(OpinionState(states[static_cast<std::size_t>(s)], dim), kernel, alpha,
                                     max_steps)) {
      sample.resolved = true;
      sample.steps = roll->steps;
      sample.clusters = std::move(roll->clusters);
    }
  });
  bool any = false;
  for (const auto& s : posterior.samples) any = any || (s.resolved && s.weight > 0.0);
  if (!any) throw PredictionFailure("no particle reached a clustered state");
  return posterior;
}

ClusterEstimate posterior_means(const ClusterPosterior& posterior, Index rank) {
  if (rank < 0) throw MissingRankError("negative cluster rank");
  double mass = 0.0;
  double size = 0.0;
  VectorXd center;
  for (const auto& s : posterior.samples) {
    if (!s.resolved || s.clusters.n_clusters() <= rank || !(s.weight > 0.0)) continue;
    const VectorXd& c = s.clusters.centers[static_cast<std::size_t>(rank)];
    if (center.size() == 0) center = VectorXd::Zero(c.size());
    mass += s.weight;
    size += s.weight * static_cast<double>(s.clusters.sizes[static_cast<std::size_t>(rank)]);
    center += s.weight * c;
  }
  if (!(mass > 0.0)) throw MissingRankError("no resolved sample has cluster rank " + std::to_string(rank));
  return {size / mass, center / mass};
}

std::vector<ClusterEstimate> posterior_estimates(const ClusterPosterior& posterior) {
  std::vector<ClusterEstimate> out;
  for (Index r = 0; r < posterior.max_rank(); ++r) {
    try {
      out.push_back(posterior_means(posterior, r));
    } catch (const MissingRankError&) {
      break;
    }
  }
  return out;
}

std::vector<ClusterEstimate> estimates_from(const ClusterSet& clusters) {
  std::vector<ClusterEstimate> out;
  for (Index k = 0; k < clusters.n_clusters(); ++k)
    out.push_back({static_cast<double>(clusters.sizes[k]), clusters.centers[k]});
  return out;
}

namespace {

constexpr double kExactSize = 1e-9;

const VectorXd& truth_center(const ClusterSet& truth, Index rank) {
  if (rank < 0 || rank >= truth.n_clusters())
    throw MissingRankError("truth has no cluster rank " + std::to_string(rank));
  return truth.centers[static_cast<std::size_t>(rank)];
}

}  // namespace

int success_indicator(const ClusterSet& truth, const std::vector<ClusterEstimate>& estimates, Index rank,
                      double distance_tolerance, double size_tolerance) {
  if (!(distance_tolerance > 0.0) || !(size_tolerance >= 0.0)) throw InputError("need L > 0 and K >= 0");
  const VectorXd& center = truth_center(truth, rank);
  const double size = static_cast<double>(truth.sizes[static_cast<std::size_t>(rank)]);
  for (const auto& e : estimates) {
    if (!((e.center - center).norm() <= distance_tolerance)) continue;
    const bool size_ok = size_tolerance == 0.0 ? std::abs(e.size - size) <= kExactSize
                                               : (e.size > size - size_tolerance && e.size < size + size_tolerance);
    if (size_ok) return 1;
  }
  return 0;
}

double size_error(const ClusterSet& truth, const std::vector<ClusterEstimate>& estimates, Index rank) {
  truth_center(truth, rank);
  if (rank >= static_cast<Index>(estimates.size()))
    throw MissingRankError("estimate has no cluster rank " + std::to_string(rank));
  return std::abs(static_cast<double>(truth.sizes[static_cast<std::size_t>(rank)]) -
                  estimates[static_cast<std::size_t>(rank)].size);
}

ClusterSet predict_from_observation_only(const Eigen::Ref<const VectorXd>& z_T, Index dim, Index n_agents,
                                         const InteractionKernel& kernel, double alpha, int max_steps) {
  const Index n_observed = z_T.size() / dim;
  if (dim < 1 || z_T.size() % dim != 0 || n_observed < 2 || n_agents < n_observed)
    throw InputError("observation-only prediction needs at least two observed agents");
  auto roll = roll_to_clusters(OpinionState(z_T, dim), kernel, alpha, max_steps);
  if (!roll) throw PredictionFailure("observed subsystem did not cluster within the step cap");
  ClusterSet out = std::move(roll->clusters);
  const double scale = static_cast<double>(n_agents) / static_cast<double>(n_observed);
  const int mode = std::fegetround();
  std::fesetround(FE_TONEAREST);
  for (auto& s : out.sizes) s = static_cast<Index>(std::nearbyint(scale * static_cast<double>(s)));
  std::fesetround(mode);
  return out;
}

}  // namespace opinion_smc
