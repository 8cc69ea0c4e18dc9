#include "opinion_smc/importance.hpp"

#include <cmath>
#include <numbers>

namespace opinion_smc {

GaussianProposal::GaussianProposal(VectorXd mean, MatrixXd precision)
    : mean_(std::move(mean)), precision_(std::move(precision)) {
  if (precision_.rows() != mean_.size() || precision_.cols() != mean_.size())
    throw InputError("precision matrix does not match the mean");
  if (!mean_.allFinite() || !precision_.allFinite()) throw NumericalError("non-finite proposal parameters");
  llt_.compute(precision_);
  if (llt_.info() != Eigen::Success) throw NumericalError("precision matrix is not positive definite");
  const double half_log_det = llt_.matrixLLT().diagonal().array().log().sum();
  log_norm_ = -0.5 * static_cast<double>(mean_.size()) * std::log(2.0 * std::numbers::pi) + half_log_det;
}

GaussianProposal GaussianProposal::from_canonical(const Eigen::Ref<const VectorXd>& anchor, MatrixXd precision,
                                                  const Eigen::Ref<const VectorXd>& linear) {
  GaussianProposal out(anchor, std::move(precision));
  out.mean_ += out.llt_.solve(linear);
  if (!out.mean_.allFinite()) throw NumericalError("non-finite proposal mean");
  return out;
}

VectorXd GaussianProposal::transform(const Eigen::Ref<const VectorXd>& zeta) const {
  return mean_ + llt_.matrixU().solve(zeta);
}

double GaussianProposal::log_density(const Eigen::Ref<const VectorXd>& x) const {
  const VectorXd whitened = llt_.matrixU() * (x - mean_);
  return log_norm_ - 0.5 * whitened.squaredNorm();
}

ProposalDraw draw_with_noise(const GaussianProposal& proposal, const Eigen::Ref<const VectorXd>& zeta) {
  // L^T (x - mean) = zeta, so the quadratic form is |zeta|^2.
  return {proposal.transform(zeta), proposal.log_norm() - 0.5 * zeta.squaredNorm()};
}

ProposalDraw sample_proposal(const GaussianProposal& proposal, Rng& rng) {
  return draw_with_noise(proposal, standard_normal(proposal.size(), rng));
}

double nudging_gain(const ObservationModel& model) {
  const double ve = model.sigma_eps() * model.sigma_eps();
  const double vx = model.sigma_xi() * model.sigma_xi();
  return ve / (ve + vx);
}

namespace {

void require_filter_noise(const ObservationModel& model) {
  if (!(model.sigma_xi() > 0.0) || !(model.sigma_eps() > 0.0))
    throw DegenerateDensityError("filter noise levels must be positive");
}

}  // namespace

VectorXd implicit_map_from_forecast(const Eigen::Ref<const VectorXd>& forecast,
                                    const Eigen::Ref<const VectorXd>& z_t, const ObservationModel& model) {
  require_filter_noise(model);
  const double gain = nudging_gain(model);
  VectorXd x = forecast;
  const Index d = model.dim();
  for (Index j = 0; j < model.n_observed(); ++j) {
    const Index at = model.observed()[j] * d;
    x.segment(at, d) += gain * (z_t.segment(j * d, d) - forecast.segment(at, d));
  }
  return x;
}

VectorXd implicit_map(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& z_t,
                      const ObservationModel& model, const InteractionKernel& kernel, double alpha) {
  return implicit_map_from_forecast(step(x_prev.positions(), x_prev.dim(), kernel, alpha), z_t, model);
}

namespace {

VectorXd one_step_precision_diagonal(const ObservationModel& model) {
  const double prior = 1.0 / (model.sigma_eps() * model.sigma_eps());
  const double obs = 1.0 / (model.sigma_xi() * model.sigma_xi());
  VectorXd diag = VectorXd::Constant(model.state_size(), prior);
  for (Index i : model.observed()) diag.segment(i * model.dim(), model.dim()).array() += obs;
  return diag;
}

}  // namespace

GaussianProposal implicit_density_from_forecast(const Eigen::Ref<const VectorXd>& forecast,
                                                const Eigen::Ref<const VectorXd>& z_t,
                                                const ObservationModel& model) {
  VectorXd mean = implicit_map_from_forecast(forecast, z_t, model);
  return GaussianProposal(std::move(mean), one_step_precision_diagonal(model).asDiagonal());
}

GaussianProposal implicit_density(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& z_t,
                                  const ObservationModel& model, const InteractionKernel& kernel, double alpha) {
  return implicit_density_from_forecast(step(x_prev.positions(), x_prev.dim(), kernel, alpha), z_t, model);
}

std::string_view to_string(JacobianVariant variant) {
  return variant == JacobianVariant::kFull ? "full" : "paper";
}

JacobianVariant parse_jacobian_variant(std::string_view name) {
  if (name == "full") return JacobianVariant::kFull;
  if (name == "paper") return JacobianVariant::kPaper;
  throw InputError("unknown Jacobian variant: " + std::string(name));
}

MatrixXd jacobian_Hg(const Eigen::Ref<const VectorXd>& x, const InteractionKernel& kernel, double alpha,
                     const ObservationModel& model, JacobianVariant variant) {
  const Index d = model.dim();
  const Index n = model.n_agents();
  if (x.size() != n * d) throw InputError("state size does not match the observation model");
  const double scale = (variant == JacobianVariant::kFull ? alpha : 1.0) / static_cast<double>(n);
  const double phi0 = kernel.at(0.0);

  MatrixXd jac = MatrixXd::Zero(n * d, model.n_observed() * d);
  for (Index j = 0; j < model.n_observed(); ++j) {
    const Index o = model.observed()[j];
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double w = kernel.at((x.segment(i * d, d) - x.segment(o * d, d)).norm());
      total += w;
      if (w != 0.0) jac.block(i * d, j * d, d, d).diagonal().setConstant(scale * w);
    }
    // Self block: phi(0)*scale from the loop above, minus the row sum.
    double self = scale * phi0 - scale * total;
    if (variant == JacobianVariant::kFull) self += 1.0;
    jac.block(o * d, j * d, d, d).diagonal().setConstant(self);
  }
  return jac;
}

MatrixXd jacobian_Hg(const OpinionState& state, const InteractionKernel& kernel, double alpha,
                     const ObservationModel& model, JacobianVariant variant) {
  return jacobian_Hg(state.positions(), kernel, alpha, model, variant);
}

std::string_view to_string(Lookahead lookahead) {
  return lookahead == Lookahead::kPredictive ? "predictive" : "observation";
}

Lookahead parse_lookahead(std::string_view name) {
  if (name == "predictive") return Lookahead::kPredictive;
  if (name == "observation") return Lookahead::kObservation;
  throw InputError("unknown look-ahead density: " + std::string(name));
}

double lookahead_sigma(const ObservationModel& model, Lookahead lookahead) {
  const double vx = model.sigma_xi() * model.sigma_xi();
  return std::sqrt(lookahead == Lookahead::kPredictive ? vx + model.sigma_eps() * model.sigma_eps() : vx);
}

GaussianProposal ais_quadratic_from_linearization(const Eigen::Ref<const VectorXd>& forecast,
                                                  const Eigen::Ref<const VectorXd>& map_point,
                                                  const Eigen::Ref<const MatrixXd>& jacobian,
                                                  const Eigen::Ref<const VectorXd>& hg_at_map,
                                                  const Eigen::Ref<const VectorXd>& z_t,
                                                  const Eigen::Ref<const VectorXd>& z_next,
                                                  const ObservationModel& model, Lookahead lookahead) {
  require_filter_noise(model);
  const double inv_vx = 1.0 / (model.sigma_xi() * model.sigma_xi());
  const double inv_ve = 1.0 / (model.sigma_eps() * model.sigma_eps());
  const double sl = lookahead_sigma(model, lookahead);
  const double inv_vl = 1.0 / (sl * sl);

  MatrixXd a = one_step_precision_diagonal(model).asDiagonal();
  a.selfadjointView<Eigen::Lower>().rankUpdate(jacobian, inv_vl);
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();

  VectorXd b = inv_vl * (jacobian * (z_next - hg_at_map)) + inv_ve * (forecast - map_point) +
               inv_vx * embed(z_t - observe(map_point, model), model);

  return GaussianProposal::from_canonical(map_point, std::move(a), b);
}

GaussianProposal ais_quadratic_from_forecast(const Eigen::Ref<const VectorXd>& forecast,
                                             const Eigen::Ref<const VectorXd>& z_t,
                                             const Eigen::Ref<const VectorXd>& z_next,
                                             const ObservationModel& model, const InteractionKernel& kernel,
                                             double alpha, JacobianVariant variant,
                                             Lookahead lookahead) {
  const VectorXd map_point = implicit_map_from_forecast(forecast, z_t, model);
  const MatrixXd jac = jacobian_Hg(map_point, kernel, alpha, model, variant);
  const VectorXd hg = observe(step(map_point, model.dim(), kernel, alpha), model);
  return ais_quadratic_from_linearization(forecast, map_point, jac, hg, z_t, z_next, model, lookahead);
}

GaussianProposal ais_quadratic(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& z_t,
                               const Eigen::Ref<const VectorXd>& z_next, const ObservationModel& model,
                               const InteractionKernel& kernel, double alpha, JacobianVariant variant,
                               Lookahead lookahead) {
  return ais_quadratic_from_forecast(step(x_prev.positions(), x_prev.dim(), kernel, alpha), z_t, z_next, model,
                                     kernel, alpha, variant, lookahead);
}

GaussianProposal auxiliary_proposal(const Eigen::Ref<const VectorXd>& forecast, const Eigen::Ref<const VectorXd>& z_t,
                                    const VectorXd* z_next, const ObservationModel& model,
                                    const InteractionKernel& kernel, double alpha, JacobianVariant variant,
                                    Lookahead lookahead) {
  if (z_next == nullptr) return implicit_density_from_forecast(forecast, z_t, model);
  return ais_quadratic_from_forecast(forecast, z_t, *z_next, model, kernel, alpha, variant, lookahead);
}

double incremental_log_weight(const Eigen::Ref<const VectorXd>& forecast, const Eigen::Ref<const VectorXd>& x_new,
                              const Eigen::Ref<const VectorXd>& z_t, const VectorXd* z_next,
                              bool divide_previous_lookahead, double proposal_logpdf,
                              const ObservationModel& model, const InteractionKernel& kernel, double alpha,
                              Lookahead lookahead) {
  const double sl = lookahead_sigma(model, lookahead);
  double lw = log_trans_from_forecast(x_new, forecast, model) + log_lik_obs(z_t, x_new, model) - proposal_logpdf;
  if (z_next != nullptr)
    lw += log_gaussian_isotropic(*z_next - observe(step(x_new, model.dim(), kernel, alpha), model), sl);
  if (divide_previous_lookahead) lw -= log_gaussian_isotropic(z_t - observe(forecast, model), sl);
  return lw;
}

double ais_incremental_log_weight(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& x_new,
                                  const Eigen::Ref<const VectorXd>& z_t,
                                  const Eigen::Ref<const VectorXd>& z_next, double proposal_logpdf,
                                  const ObservationModel& model, const InteractionKernel& kernel, double alpha,
                                  Lookahead lookahead) {
  const VectorXd next = z_next;
  return incremental_log_weight(step(x_prev.positions(), x_prev.dim(), kernel, alpha), x_new, z_t, &next, true,
                                proposal_logpdf, model, kernel, alpha, lookahead);
}

}  // namespace opinion_smc
