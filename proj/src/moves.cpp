#include "opinion_smc/moves.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "opinion_smc/errors.hpp"
#include "opinion_smc/parallel.hpp"

namespace opinion_smc {

std::string_view to_string(MoveAcceptance acceptance) {
  return acceptance == MoveAcceptance::kTarget ? "target" : "observation";
}

MoveAcceptance parse_move_acceptance(std::string_view name) {
  if (name == "target") return MoveAcceptance::kTarget;
  if (name == "observation") return MoveAcceptance::kObservation;
  throw InputError("unknown move acceptance rule: " + std::string(name));
}

void MoveConfig::validate() const {
  if (!(beta > 0.0 && beta <= 1.0)) throw InputError("beta must lie in (0, 1]");
  if (local_window < 1) throw InputError("T0 must be at least 1");
  if (backtrack < 1) throw InputError("t0 must be at least 1");
  if (!(tolerance_fraction > 0.0)) throw InputError("information-move tolerance must be positive");
  if (max_info_retries < 1) throw InputError("max_info_retries must be at least 1");
  if (gd_iters < 0) throw InputError("gd_iters must be nonnegative");
}

MoveStats& MoveStats::operator+=(const MoveStats& other) {
  attempted += other.attempted;
  accepted += other.accepted;
  draws += other.draws;
  exhausted += other.exhausted;
  return *this;
}

Index MoveContext::moved_agents() const {
  return static_cast<Index>(std::floor(config.beta * static_cast<double>(model->n_unobserved()) + 1e-9));
}

namespace {

constexpr double kLaplaceRidge = 1e-8;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 30;

std::vector<Index> choose_unobserved(const ObservationModel& model, Index m, Rng& rng) {
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(m));
  std::sample(model.unobserved().begin(), model.unobserved().end(), std::back_inserter(chosen), m, rng);
  return chosen;
}

VectorXd observed_forecast(const VectorXd& x, const MoveContext& ctx) {
  return observe(step(x, ctx.model->dim(), *ctx.kernel, ctx.alpha), *ctx.model);
}

double log_target(const VectorXd& x, const VectorXd& prev_forecast, const VectorXd& z_t, const VectorXd& z_next,
                  const MoveContext& ctx) {
  return log_trans_from_forecast(x, prev_forecast, *ctx.model) + log_lik_obs(z_t, x, *ctx.model) +
         log_gaussian_isotropic(z_next - observed_forecast(x, ctx), lookahead_sigma(*ctx.model, ctx.lookahead));
}

/// Gauss-Newton descent on |z_next - Hg(x)|^2 over agent k, then the
/// Laplace precision at the end point.
GaussianProposal directional_laplace(VectorXd x, Index agent, const VectorXd& z_next, const MoveContext& ctx) {
  const Index d = ctx.model->dim();
  const auto block_rows = [&](const VectorXd& state) {
    return MatrixXd(jacobian_Hg(state, *ctx.kernel, ctx.alpha, *ctx.model, JacobianVariant::kFull)
                        .middleRows(agent * d, d));
  };
  for (int it = 0; it < ctx.config.gd_iters; ++it) {
    const MatrixXd jk = block_rows(x);
    const VectorXd residual = z_next - observed_forecast(x, ctx);
    const double f = residual.squaredNorm();
    const VectorXd grad = -2.0 * jk * residual;
    const double g2 = grad.squaredNorm();
    if (g2 == 0.0) break;
    const double curvature = 2.0 * (jk.transpose() * grad).squaredNorm();
    if (!(curvature > 0.0)) break;
    double eta = g2 / curvature;
    bool moved = false;
    for (int b = 0; b < kMaxBacktracks; ++b) {
      VectorXd trial = x;
      trial.segment(agent * d, d) -= eta * grad;
      if ((z_next - observed_forecast(trial, ctx)).squaredNorm() <= f - kArmijo * eta * g2) {
        x = std::move(trial);
        moved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!moved) break;
  }
  const MatrixXd jk = block_rows(x);
  const double sl = lookahead_sigma(*ctx.model, ctx.lookahead);
  MatrixXd precision = jk * jk.transpose() / (sl * sl);
  precision.diagonal().array() += kLaplaceRidge;
  return GaussianProposal(x.segment(agent * d, d), std::move(precision));
}

std::vector<VectorXd> to_vector(const std::deque<VectorXd>& history) {
  return {history.begin(), history.end()};
}

bool physical_and_connected(const std::vector<VectorXd>& window, const MoveContext& ctx) {
  const auto& model = *ctx.model;
  const int t0 = ctx.config.backtrack;
  if (window.size() >= static_cast<std::size_t>(t0) + 1) {
    const double tol = ctx.config.tolerance_fraction * ctx.kernel->support_radius();
    if (is_nonphysical(window, model.dim(), t0, tol)) return false;
  }
  if (model.n_observed() == 0 || model.n_unobserved() == 0) return true;
  return disconnected_unobserved(OpinionState(window.back(), model.dim()), model.observed(), *ctx.kernel).empty();
}

double lower_quartile(VectorXd w) {
  std::sort(w.begin(), w.end());
  const double pos = 0.25 * static_cast<double>(w.size() - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min<Index>(lo + 1, w.size() - 1);
  return w(lo) + (pos - static_cast<double>(lo)) * (w(hi) - w(lo));
}

Index categorical(const VectorXd& weights, double u) {
  double cumulative = 0.0;
  Index last = 0;
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights(i) > 0.0)) continue;
    last = i;
    cumulative += weights(i);
    if (u < cumulative) return i;
  }
  return last;
}

}  // namespace

MoveStats directional_move(Particle& particle, const MoveContext& ctx, Rng& rng) {
  MoveStats stats;
  const VectorXd* z_next = ctx.z_after(ctx.t);
  const Index m = ctx.moved_agents();
  if (z_next == nullptr || m == 0 || particle.history.size() < 2) return stats;

  const auto& model = *ctx.model;
  const Index d = model.dim();
  const VectorXd& z_t = ctx.z(ctx.t);
  const VectorXd prev_forecast = step(particle.history[particle.history.size() - 2], d, *ctx.kernel, ctx.alpha);
  VectorXd x = particle.state();
  double current_target = log_target(x, prev_forecast, z_t, *z_next, ctx);

  for (Index k : choose_unobserved(model, m, rng)) {
    ++stats.attempted;
    ++stats.draws;
    const GaussianProposal forward = directional_laplace(x, k, *z_next, ctx);
    const ProposalDraw draw = sample_proposal(forward, rng);
    VectorXd candidate = x;
    candidate.segment(k * d, d) = draw.x;

    double log_ratio;
    double candidate_target = 0.0;
    if (ctx.config.acceptance == MoveAcceptance::kTarget) {
      candidate_target = log_target(candidate, prev_forecast, z_t, *z_next, ctx);
      const GaussianProposal reverse = directional_laplace(candidate, k, *z_next, ctx);
      log_ratio = candidate_target - current_target + reverse.log_density(x.segment(k * d, d)) - draw.log_density;
    } else {
      log_ratio = log_lik_obs(z_t, candidate, model) - log_lik_obs(z_t, x, model);
    }
    const double u = uniform01(rng);
    if (std::log(u) < log_ratio) {
      x = std::move(candidate);
      if (ctx.config.acceptance == MoveAcceptance::kTarget) current_target = candidate_target;
      ++stats.accepted;
    }
  }
  particle.history.back() = std::move(x);
  return stats;
}

MoveStats local_trajectory_move(Ensemble& ensemble, const MoveContext& ctx, const StreamTree& streams,
                                int threads) {
  MoveStats total;
  const int anchor_t = ctx.t - ctx.config.local_window;
  const EnsembleSnapshot* anchor = ensemble.snapshot_at(anchor_t);
  if (anchor == nullptr || ensemble.size() == 0) return total;

  const VectorXd log_w = ensemble.log_weights();
  const VectorXd w = normalized_weights(log_w);
  const double lse = log_sum_exp(log_w);
  const double c = lower_quartile(w);
  if (!(c > 0.0)) return total;
  const double replaced_log_weight = std::log(c) + lse;
  const VectorXd anchor_w = normalized_weights(anchor->log_weights);

  const auto& model = *ctx.model;
  const Index d = model.dim();
  const Index m = ctx.moved_agents();
  const VectorXd& z_t = ctx.z(ctx.t);

  std::vector<MoveStats> stats(ensemble.particles.size());
  parallel_for(ensemble.size(), threads, [&](Index s) {
    Particle& particle = ensemble.particles[static_cast<std::size_t>(s)];
    Rng rng = streams.engine(Stream::kLocalTrajectoryMove, static_cast<std::uint64_t>(ctx.t),
                             static_cast<std::uint64_t>(s));
    const double select = std::max(0.0, 1.0 - w(s) / c);
    if (!(uniform01(rng) < select)) return;
    MoveStats& st = stats[static_cast<std::size_t>(s)];
    ++st.attempted;

    VectorXd x = anchor->states[static_cast<std::size_t>(categorical(anchor_w, uniform01(rng)))];
    for (Index k : choose_unobserved(model, m, rng))
      for (Index c2 = 0; c2 < d; ++c2) x(k * d + c2) = ctx.prior.sample(rng);

    std::deque<VectorXd> path{x};
    for (int tau = anchor_t + 1; tau <= ctx.t; ++tau) {
      const VectorXd forecast = step(x, d, *ctx.kernel, ctx.alpha);
      const GaussianProposal q =
          auxiliary_proposal(forecast, ctx.z(tau), ctx.z_after(tau), model, *ctx.kernel, ctx.alpha, ctx.jacobian, ctx.lookahead);
      x = sample_proposal(q, rng).x;
      path.push_back(x);
      ++st.draws;
    }
    const double log_ratio = log_lik_obs(z_t, x, model) - log_lik_obs(z_t, particle.state(), model);
    if (std::log(uniform01(rng)) < log_ratio) {
      while (path.size() > std::max<std::size_t>(ensemble.window, 1)) path.pop_front();
      particle.history = std::move(path);
      particle.log_weight = replaced_log_weight;
      ++st.accepted;
    }
  });
  for (const auto& st : stats) total += st;
  return total;
}

bool needs_information_move(const Particle& particle, const MoveContext& ctx) {
  return !physical_and_connected(to_vector(particle.history), ctx);
}

MoveStats information_move(Particle& particle, const MoveContext& ctx, Rng& rng) {
  MoveStats stats;
  if (particle.history.size() < 2 || !needs_information_move(particle, ctx)) return stats;
  stats.attempted = 1;

  const auto& model = *ctx.model;
  const VectorXd& z_t = ctx.z(ctx.t);
  const VectorXd forecast = step(particle.history[particle.history.size() - 2], model.dim(), *ctx.kernel, ctx.alpha);
  const GaussianProposal q =
      auxiliary_proposal(forecast, z_t, ctx.z_after(ctx.t), model, *ctx.kernel, ctx.alpha, ctx.jacobian, ctx.lookahead);
  const double current = log_lik_obs(z_t, particle.state(), model);

  std::vector<VectorXd> window = to_vector(particle.history);
  for (int k = 0; k < ctx.config.max_info_retries; ++k) {
    ++stats.draws;
    window.back() = sample_proposal(q, rng).x;
    if (!physical_and_connected(window, ctx)) continue;
    if (std::log(uniform01(rng)) < log_lik_obs(z_t, window.back(), model) - current) {
      particle.history.back() = window.back();
      stats.accepted = 1;
      return stats;
    }
  }
  stats.exhausted = 1;
  return stats;
}

}  // namespace opinion_smc
