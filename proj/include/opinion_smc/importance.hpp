#pragma once

#include <string_view>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/linalg.hpp"
#include "opinion_smc/rng.hpp"
#include "opinion_smc/state_space.hpp"

namespace opinion_smc {

/// A Gaussian N(mean, precision^-1) held through the Cholesky factor of its
/// precision. log_norm is the log-density at the mean.
class GaussianProposal {
 public:
  GaussianProposal(VectorXd mean, MatrixXd precision);
  /// Canonical form: mean = anchor + precision^-1 * linear.
  static GaussianProposal from_canonical(const Eigen::Ref<const VectorXd>& anchor, MatrixXd precision,
                                         const Eigen::Ref<const VectorXd>& linear);

  const VectorXd& mean() const { return mean_; }
  const MatrixXd& precision() const { return precision_; }
  /// Lower-triangular L with precision = L L^T.
  MatrixXd cholesky_lower() const { return llt_.matrixL(); }
  double log_norm() const { return log_norm_; }
  Index size() const { return mean_.size(); }

  double log_density(const Eigen::Ref<const VectorXd>& x) const;
  /// precision^-1 * rhs
  VectorXd solve(const Eigen::Ref<const VectorXd>& rhs) const { return llt_.solve(rhs); }
  /// mean + L^-T zeta
  VectorXd transform(const Eigen::Ref<const VectorXd>& zeta) const;

 private:
  VectorXd mean_;
  MatrixXd precision_;
  Eigen::LLT<MatrixXd> llt_;
  double log_norm_;
};

struct ProposalDraw {
  VectorXd x;
  double log_density;
};

/// x = mean + L^-T zeta for standard normal zeta; exact log-density returned.
ProposalDraw sample_proposal(const GaussianProposal& proposal, Rng& rng);
/// Deterministic form of sample_proposal for a given noise vector.
ProposalDraw draw_with_noise(const GaussianProposal& proposal, const Eigen::Ref<const VectorXd>& zeta);

/// Weight on the innovation in the one-step MAP point:
/// sigma_eps^2 / (sigma_eps^2 + sigma_xi^2).
double nudging_gain(const ObservationModel& model);

/// Minimizer of |z - Hx|^2/(2 sigma_xi^2) + |x - g(x_prev)|^2/(2 sigma_eps^2).
VectorXd implicit_map(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& z_t,
                      const ObservationModel& model, const InteractionKernel& kernel, double alpha);
VectorXd implicit_map_from_forecast(const Eigen::Ref<const VectorXd>& forecast,
                                    const Eigen::Ref<const VectorXd>& z_t, const ObservationModel& model);

/// One-step optimal importance density p(x | x_prev, z_t): mean at the MAP
/// point, diagonal precision 1/sigma_xi^2 + 1/sigma_eps^2 on observed
/// coordinates and 1/sigma_eps^2 elsewhere.
GaussianProposal implicit_density(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& z_t,
                                  const ObservationModel& model, const InteractionKernel& kernel, double alpha);
GaussianProposal implicit_density_from_forecast(const Eigen::Ref<const VectorXd>& forecast,
                                                const Eigen::Ref<const VectorXd>& z_t,
                                                const ObservationModel& model);

enum class JacobianVariant {
  kFull,   ///< analytic derivative of the observed block of g
  kPaper,  ///< interaction part only, without alpha or the identity block
};

std::string_view to_string(JacobianVariant variant);
JacobianVariant parse_jacobian_variant(std::string_view name);

/// Density used for the look-ahead factor p(z_next | x).
enum class Lookahead {
  kPredictive,   ///< N(Hg(x), (sigma_xi^2 + sigma_eps^2) I), exact for the transition model
  kObservation,  ///< N(Hg(x), sigma_xi^2 I), g(x) taken as the next state
};

std::string_view to_string(Lookahead lookahead);
Lookahead parse_lookahead(std::string_view name);
double lookahead_sigma(const ObservationModel& model, Lookahead lookahead);

/// Gradient of x -> Hg(x), a dN x dN1 matrix whose column block j is the
/// derivative of observed agent j's forecast. Blocks are multiples of I_d
/// since phi is piecewise constant.
MatrixXd jacobian_Hg(const Eigen::Ref<const VectorXd>& x, const InteractionKernel& kernel, double alpha,
                     const ObservationModel& model, JacobianVariant variant = JacobianVariant::kFull);
MatrixXd jacobian_Hg(const OpinionState& state, const InteractionKernel& kernel, double alpha,
                     const ObservationModel& model, JacobianVariant variant = JacobianVariant::kFull);

/// Two-observation importance density. Hg is linearized at the one-step MAP
/// point x*, giving the quadratic (1/2) y^T A y - y^T b with y = x - x*:
///   A = J J^T / v + I / sigma_eps^2 + H^T H / sigma_xi^2
///   b = J (z_next - Hg(x*)) / v + (g(x_prev) - x*) / sigma_eps^2
///       + H^T (z_t - H x*) / sigma_xi^2
/// and the proposal N(x* + A^-1 b, A^-1), where v is the look-ahead variance.
GaussianProposal ais_quadratic(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& z_t,
                               const Eigen::Ref<const VectorXd>& z_next, const ObservationModel& model,
                               const InteractionKernel& kernel, double alpha,
                               JacobianVariant variant = JacobianVariant::kFull,
                               Lookahead lookahead = Lookahead::kPredictive);
GaussianProposal ais_quadratic_from_forecast(const Eigen::Ref<const VectorXd>& forecast,
                                             const Eigen::Ref<const VectorXd>& z_t,
                                             const Eigen::Ref<const VectorXd>& z_next,
                                             const ObservationModel& model, const InteractionKernel& kernel,
                                             double alpha, JacobianVariant variant = JacobianVariant::kFull,
                                             Lookahead lookahead = Lookahead::kPredictive);
/// The quadratic assembled from an explicit linearization (map_point, J, Hg(map_point)).
GaussianProposal ais_quadratic_from_linearization(const Eigen::Ref<const VectorXd>& forecast,
                                                  const Eigen::Ref<const VectorXd>& map_point,
                                                  const Eigen::Ref<const MatrixXd>& jacobian,
                                                  const Eigen::Ref<const VectorXd>& hg_at_map,
                                                  const Eigen::Ref<const VectorXd>& z_t,
                                                  const Eigen::Ref<const VectorXd>& z_next,
                                                  const ObservationModel& model,
                                                  Lookahead lookahead = Lookahead::kPredictive);

/// The two-observation density when z_next is given, otherwise the one-step
/// implicit density.
GaussianProposal auxiliary_proposal(const Eigen::Ref<const VectorXd>& forecast, const Eigen::Ref<const VectorXd>& z_t,
                                    const VectorXd* z_next, const ObservationModel& model,
                                    const InteractionKernel& kernel, double alpha,
                                    JacobianVariant variant = JacobianVariant::kFull,
                                    Lookahead lookahead = Lookahead::kPredictive);

/// log of the two-observation incremental weight
///   p(x_new|x_prev) p(z_t|x_new) p(z_next|x_new) / (p(z_t|x_prev) q(x_new))
/// with both look-ahead factors from `lookahead`.
double ais_incremental_log_weight(const OpinionState& x_prev, const Eigen::Ref<const VectorXd>& x_new,
                                  const Eigen::Ref<const VectorXd>& z_t,
                                  const Eigen::Ref<const VectorXd>& z_next, double proposal_logpdf,
                                  const ObservationModel& model, const InteractionKernel& kernel, double alpha,
                                  Lookahead lookahead = Lookahead::kPredictive);

/// General incremental weight with the forecast g(x_prev) precomputed.
/// The look-ahead factor p(z_next|x_new) is included when z_next is given;
/// p(z_t|x_prev) is divided out when the previous step carried one.
double incremental_log_weight(const Eigen::Ref<const VectorXd>& forecast, const Eigen::Ref<const VectorXd>& x_new,
                              const Eigen::Ref<const VectorXd>& z_t, const VectorXd* z_next,
                              bool divide_previous_lookahead, double proposal_logpdf,
                              const ObservationModel& model, const InteractionKernel& kernel, double alpha,
                              Lookahead lookahead = Lookahead::kPredictive);

}  // namespace opinion_smc
