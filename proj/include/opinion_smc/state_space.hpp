#pragma once

#include <vector>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/linalg.hpp"

namespace opinion_smc {

/// Partial linear observation of the agent system, z = Hx + xi, together with
/// the artificial transition noise used inside the filter, x' = g(x) + eps.
///
/// H selects the observed agents in the order given; G selects the rest in
/// ascending order. sigma_xi may be zero for truth generation, in which case
/// log-likelihoods are undefined.
class ObservationModel {
 public:
  ObservationModel(Index n_agents, Index dim, std::vector<Index> observed, double sigma_xi,
                   double sigma_eps);

  /// The first n_observed agents are observed.
  static ObservationModel first_agents(Index n_agents, Index dim, Index n_observed, double sigma_xi,
                                       double sigma_eps);

  Index n_agents() const { return n_agents_; }
  Index dim() const { return dim_; }
  Index n_observed() const { return static_cast<Index>(observed_.size()); }
  Index n_unobserved() const { return static_cast<Index>(unobserved_.size()); }
  Index state_size() const { return n_agents_ * dim_; }
  Index observation_size() const { return n_observed() * dim_; }

  const std::vector<Index>& observed() const { return observed_; }
  const std::vector<Index>& unobserved() const { return unobserved_; }
  bool is_observed(Index agent) const { return observed_mask_[static_cast<std::size_t>(agent)]; }

  double sigma_xi() const { return sigma_xi_; }
  double sigma_eps() const { return sigma_eps_; }
  ObservationModel with_noise(double sigma_xi, double sigma_eps) const;

 private:
  Index n_agents_;
  Index dim_;
  std::vector<Index> observed_;
  std::vector<Index> unobserved_;
  std::vector<bool> observed_mask_;
  double sigma_xi_;
  double sigma_eps_;
};

/// Hx: observed coordinates concatenated in observation order.
template <typename Derived>
VectorX<typename Derived::Scalar> observe(const Eigen::MatrixBase<Derived>& x,
                                          const ObservationModel& model) {
  const Index d = model.dim();
  VectorX<typename Derived::Scalar> z(model.observation_size());
  for (Index j = 0; j < model.n_observed(); ++j) z.segment(j * d, d) = x.segment(model.observed()[j] * d, d);
  return z;
}

VectorXd observe(const OpinionState& state, const ObservationModel& model);

/// H^T z: places an observation-sized vector into the observed coordinates of
/// a zero state vector.
VectorXd embed(const Eigen::Ref<const VectorXd>& z, const ObservationModel& model);

/// log N(residual; 0, sigma^2 I).
double log_gaussian_isotropic(const Eigen::Ref<const VectorXd>& residual, double sigma);

/// log N(z; Hx, sigma_xi^2 I).
double log_lik_obs(const Eigen::Ref<const VectorXd>& z, const Eigen::Ref<const VectorXd>& x,
                   const ObservationModel& model);
double log_lik_obs(const Eigen::Ref<const VectorXd>& z, const OpinionState& state,
                   const ObservationModel& model);

/// log N(x_next; g(x_prev), sigma_eps^2 I).
double log_trans(const OpinionState& x_next, const OpinionState& x_prev, const InteractionKernel& kernel,
                 double alpha, const ObservationModel& model);
/// Same, with the forecast g(x_prev) precomputed.
double log_trans_from_forecast(const Eigen::Ref<const VectorXd>& x_next,
                               const Eigen::Ref<const VectorXd>& forecast, const ObservationModel& model);

/// W = [H^T | A^T H^T | ... | (A^T)^(dN-1) H^T] for the globally coupled
/// linear system (phi == 1), with A = c1 on diagonal blocks and c2 elsewhere,
/// c1 = -(N-1)/N, c2 = 1/N.
MatrixXd observability_matrix(Index n_agents, Index dim, Index n_observed);

/// Numerical rank of the observability matrix (singular values below
/// 1e-10 * largest count as zero). The Krylov space of I + alpha*A equals
/// that of A for alpha != 0, so alpha only has to be positive.
Index observability_rank(Index n_agents, Index dim, Index n_observed, double alpha);

}  // namespace opinion_smc
