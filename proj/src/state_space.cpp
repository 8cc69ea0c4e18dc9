#include "opinion_smc/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace opinion_smc {

ObservationModel::ObservationModel(Index n_agents, Index dim, std::vector<Index> observed, double sigma_xi,
                                   double sigma_eps)
    : n_agents_(n_agents),
      dim_(dim),
      observed_(std::move(observed)),
      observed_mask_(static_cast<std::size_t>(std::max<Index>(n_agents, 0)), false),
      sigma_xi_(sigma_xi),
      sigma_eps_(sigma_eps) {
  if (n_agents_ < 2 || dim_ < 1) throw InputError("observation model needs N >= 2 and d >= 1");
  for (Index i : observed_) {
    if (i < 0 || i >= n_agents_) throw InputError("observed index out of range");
    if (observed_mask_[i]) throw InputError("observed indices must be distinct");
    observed_mask_[i] = true;
  }
  for (Index i = 0; i < n_agents_; ++i)
    if (!observed_mask_[i]) unobserved_.push_back(i);
  if (!(sigma_xi_ >= 0.0) || !(sigma_eps_ >= 0.0)) throw InputError("noise levels must be nonnegative");
}

ObservationModel ObservationModel::first_agents(Index n_agents, Index dim, Index n_observed, double sigma_xi,
                                                double sigma_eps) {
  if (n_observed < 0 || n_observed > n_agents) throw InputError("observed count out of range");
  std::vector<Index> observed(static_cast<std::size_t>(n_observed));
  for (Index i = 0; i < n_observed; ++i) observed[i] = i;
  return ObservationModel(n_agents, dim, std::move(observed), sigma_xi, sigma_eps);
}

ObservationModel ObservationModel::with_noise(double sigma_xi, double sigma_eps) const {
  return ObservationModel(n_agents_, dim_, observed_, sigma_xi, sigma_eps);
}

VectorXd observe(const OpinionState& state, const ObservationModel& model) {
  return observe(state.positions(), model);
}

VectorXd embed(const Eigen::Ref<const VectorXd>& z, const ObservationModel& model) {
  const Index d = model.dim();
  VectorXd x = VectorXd::Zero(model.state_size());
  for (Index j = 0; j < model.n_observed(); ++j) x.segment(model.observed()[j] * d, d) = z.segment(j * d, d);
  return x;
}

double log_gaussian_isotropic(const Eigen::Ref<const VectorXd>& residual, double sigma) {
  if (!(sigma > 0.0)) throw DegenerateDensityError("Gaussian log-density needs a positive standard deviation");
  const double n = static_cast<double>(residual.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma * sigma) -
         residual.squaredNorm() / (2.0 * sigma * sigma);
}

double log_lik_obs(const Eigen::Ref<const VectorXd>& z, const Eigen::Ref<const VectorXd>& x,
                   const ObservationModel& model) {
  if (!(model.sigma_xi() > 0.0)) throw DegenerateDensityError("observation noise is zero");
  return log_gaussian_isotropic(z - observe(x, model), model.sigma_xi());
}

double log_lik_obs(const Eigen::Ref<const VectorXd>& z, const OpinionState& state,
                   const ObservationModel& model) {
  return log_lik_obs(z, state.positions(), model);
}

double log_trans_from_forecast(const Eigen::Ref<const VectorXd>& x_next,
                               const Eigen::Ref<const VectorXd>& forecast, const ObservationModel& model) {
  if (!(model.sigma_eps() > 0.0)) throw DegenerateDensityError("transition noise is zero");
  return log_gaussian_isotropic(x_next - forecast, model.sigma_eps());
}

double log_trans(const OpinionState& x_next, const OpinionState& x_prev, const InteractionKernel& kernel,
                 double alpha, const ObservationModel& model) {
  return log_trans_from_forecast(x_next.positions(), step(x_prev.positions(), x_prev.dim(), kernel, alpha),
                                 model);
}

MatrixXd observability_matrix(Index n_agents, Index dim, Index n_observed) {
  if (n_observed < 1 || n_observed > n_agents) throw InputError("need 1 <= N1 <= N");
  const Index n = n_agents * dim;
  const double c1 = -static_cast<double>(n_agents - 1) / static_cast<double>(n_agents);
  const double c2 = 1.0 / static_cast<double>(n_agents);
  // A = coupling (x) I_d
  MatrixXd a = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n_agents; ++i)
    for (Index j = 0; j < n_agents; ++j)
      a.block(i * dim, j * dim, dim, dim).diagonal().setConstant(i == j ? c1 : c2);

  MatrixXd ht = MatrixXd::Zero(n, n_observed * dim);
  ht.topRows(n_observed * dim).setIdentity();

  MatrixXd w(n, n * ht.cols());
  MatrixXd block = ht;
  for (Index k = 0; k < n; ++k) {
    w.middleCols(k * ht.cols(), ht.cols()) = block;
    block = a.transpose() * block;
  }
  return w;
}

Index observability_rank(Index n_agents, Index dim, Index n_observed, double alpha) {
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  const MatrixXd w = observability_matrix(n_agents, dim, n_observed);
  const Eigen::BDCSVD<MatrixXd> svd(w);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > 1e-10 * s(0)).count();
}

}  // namespace opinion_smc
