#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "opinion_smc/errors.hpp"
#include "opinion_smc/linalg.hpp"
#include "opinion_smc/rng.hpp"

namespace opinion_smc {

/// Piecewise-constant communication function.
///
/// Interval k is the half-open range [breakpoints[k-1], breakpoints[k]) with
/// breakpoints[-1] = 0, and carries values[k]. The last breakpoint is the
/// support radius R; the function vanishes for r >= R. R may be +infinity,
/// giving a globally supported kernel.
class InteractionKernel {
 public:
  InteractionKernel(std::vector<double> breakpoints, std::vector<double> values);

  /// 1 on [0, sqrt(2)/2), 0.1 on [sqrt(2)/2, 1), 0 beyond.
  static InteractionKernel piecewise_default();
  /// phi == value everywhere (no cutoff).
  static InteractionKernel global_constant(double value = 1.0);

  /// Throws InputError for negative or NaN r.
  double operator()(double r) const;

  /// No argument check; r must be a valid distance.
  double at(double r) const {
    for (std::size_t k = 0; k < breakpoints_.size(); ++k)
      if (r < breakpoints_[k]) return values_[k];
    return 0.0;
  }

  double support_radius() const { return breakpoints_.back(); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const InteractionKernel&, const InteractionKernel&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

double kernel_eval(const InteractionKernel& kernel, double r);

/// Positions of N agents in R^d, stored agent-major in one flat vector:
/// agent i occupies coordinates [i*d, (i+1)*d).
class OpinionState {
 public:
  OpinionState(VectorXd positions, Index dim);
  /// One row per agent.
  static OpinionState from_rows(const MatrixXd& rows);

  Index n_agents() const { return positions_.size() / dim_; }
  Index dim() const { return dim_; }
  const VectorXd& positions() const { return positions_; }
  VectorXd& mutable_positions() { return positions_; }

  auto agent(Index i) const { return positions_.segment(i * dim_, dim_); }
  auto agent(Index i) { return positions_.segment(i * dim_, dim_); }
  VectorXd mean() const;

 private:
  VectorXd positions_;
  Index dim_;
};

/// Forward Euler step of the first-order interacting-agent system:
///   x_i <- x_i + (alpha/N) * sum_j phi(|x_j - x_i|) (x_j - x_i).
/// Works for any Eigen scalar (including autodiff scalars, for which phi is
/// treated as locally constant).
template <typename Derived>
VectorX<typename Derived::Scalar> step(const Eigen::MatrixBase<Derived>& positions, Index dim,
                                       const InteractionKernel& kernel, double alpha) {
  using Scalar = typename Derived::Scalar;
  const Index n = positions.size() / dim;
  VectorX<Scalar> next = positions;
  const double scale = alpha / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (Index k = 0; k < dim; ++k) {
        const double diff = scalar_value(positions(j * dim + k)) - scalar_value(positions(i * dim + k));
        r2 += diff * diff;
      }
      const double w = kernel.at(std::sqrt(r2));
      if (w == 0.0) continue;
      for (Index k = 0; k < dim; ++k) {
        const Scalar pull = Scalar(scale * w) * (positions(j * dim + k) - positions(i * dim + k));
        next(i * dim + k) += pull;
        next(j * dim + k) -= pull;
      }
    }
  }
  return next;
}

OpinionState step(const OpinionState& state, const InteractionKernel& kernel, double alpha);

/// Iterates `step`, adding i.i.d. N(0, sigma^2) to every coordinate after
/// each step when sigma > 0. Returns the `steps` states after the initial one.
std::vector<OpinionState> simulate(const OpinionState& state, const InteractionKernel& kernel,
                                   double alpha, int steps, double process_noise_sigma, Rng& rng);

/// Clusters ordered by descending size, ties by lexicographic center.
struct ClusterSet {
  std::vector<std::vector<Index>> partition;
  std::vector<Index> sizes;
  std::vector<VectorXd> centers;

  Index n_clusters() const { return static_cast<Index>(sizes.size()); }
};

/// Returns the clustering when every within-component pair is closer than R
/// and every cross-component pair is farther than R; nullopt otherwise.
std::optional<ClusterSet> detect_clusters(const OpinionState& state, double radius);

/// Radius-contraction violation test over a trajectory window (oldest first,
/// current state last): the current maximal distance to the agent mean t0
/// steps back exceeds the one at that earlier time by more than tol.
bool is_nonphysical(std::span<const VectorXd> window, Index dim, int t0, double tol);
bool is_nonphysical(std::span<const OpinionState> window, int t0, double tol);

/// Unobserved agents with no phi-positive path to any observed agent.
std::vector<Index> disconnected_unobserved(const OpinionState& state,
                                           std::span<const Index> observed_indices,
                                           const InteractionKernel& kernel);

}  // namespace opinion_smc
