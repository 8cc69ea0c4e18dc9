#include "opinion_smc/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "opinion_smc/errors.hpp"
#include "opinion_smc/parallel.hpp"

namespace opinion_smc {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kSir:
      return "sir";
    case Method::kImplicit:
      return "is";
    case Method::kAuxiliaryImplicit:
      return "ais";
  }
  return "ais";
}

Method parse_method(std::string_view name) {
  if (name == "sir") return Method::kSir;
  if (name == "is") return Method::kImplicit;
  if (name == "ais") return Method::kAuxiliaryImplicit;
  throw InputError("unknown filter method: " + std::string(name));
}

void FilterConfig::validate() const {
  if (n_particles < 1) throw InputError("need at least one particle");
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  if (!(resample_threshold_fraction >= 0.0 && resample_threshold_fraction <= 1.0))
    throw InputError("resample threshold fraction must lie in [0, 1]");
  if (!(sir_temperature > 0.0)) throw InputError("SIR temperature must be positive");
  moves.validate();
}

namespace {

void sanitize(Ensemble& ensemble, int t) {
  bool any = false;
  for (auto& p : ensemble.particles) {
    if (std::isnan(p.log_weight) || p.log_weight == std::numeric_limits<double>::infinity())
      p.log_weight = -std::numeric_limits<double>::infinity();
    any = any || std::isfinite(p.log_weight);
  }
  if (!any) throw FilterFailure(t, "all particle weights vanished at step " + std::to_string(t));
}

std::uint64_t tag(Index v) { return static_cast<std::uint64_t>(v); }

}  // namespace

void sir_step(Ensemble& ensemble, const VectorXd& z_t, const ObservationModel& model,
              const InteractionKernel& kernel, double alpha, double temperature, const StreamTree& streams,
              int threads) {
  const int t = ensemble.t + 1;
  parallel_for(ensemble.size(), threads, [&](Index s) {
    Particle& p = ensemble.particles[static_cast<std::size_t>(s)];
    Rng rng = streams.engine(Stream::kPropagation, tag(t), tag(s));
    VectorXd x = step(p.state(), model.dim(), kernel, alpha);
    if (model.sigma_eps() > 0.0) x += model.sigma_eps() * standard_normal(x.size(), rng);
    p.log_weight += log_lik_obs(z_t, x, model) / temperature;
    p.advance(std::move(x), ensemble.window);
  });
  ensemble.t = t;
}

FilterResult run_filter(const std::vector<VectorXd>& observations, const ObservationModel& model,
                        const InteractionKernel& kernel, const FilterConfig& config, const StreamTree& streams) {
  config.validate();
  const int horizon = static_cast<int>(observations.size());
  if (horizon < 1) throw InputError("need at least one observation");
  if (config.method == Method::kImplicit && horizon < 2) throw InputError("implicit sampling needs T >= 2");
  if (config.method == Method::kAuxiliaryImplicit && horizon < 3) throw InputError("AIS needs T >= 3");
  for (const auto& z : observations)
    if (z.size() != model.observation_size()) throw InputError("observation size does not match the model");

  const Index n = config.n_particles;
  const bool moves_on = config.method == Method::kAuxiliaryImplicit && config.moves_enabled;
  FilterResult result;
  Ensemble& ensemble = result.ensemble;
  ensemble.window = static_cast<std::size_t>(std::max(config.moves.local_window, config.moves.backtrack)) + 1;
  ensemble.particles.resize(static_cast<std::size_t>(n));
  ensemble.t = 1;
  parallel_for(n, config.threads, [&](Index s) {
    Rng rng = streams.engine(Stream::kInitialParticles, 0, tag(s));
    Particle& p = ensemble.particles[static_cast<std::size_t>(s)];
    p.history = {sample_initial_posterior(config.prior, observations.front(), model, rng)};
    p.log_weight = -std::log(static_cast<double>(n));
  });
  result.ess_trace.push_back(ess(ensemble.log_weights()));
  ensemble.snapshot();

  MoveContext ctx;
  ctx.observations = &observations;
  ctx.model = &model;
  ctx.kernel = &kernel;
  ctx.alpha = config.alpha;
  ctx.jacobian = config.jacobian;
  ctx.lookahead = config.lookahead;
  ctx.prior = config.prior;
  ctx.config = config.moves;

  for (int t = 2; t <= horizon; ++t) {
    const VectorXd& z_t = observations[static_cast<std::size_t>(t - 1)];
    if (config.method == Method::kSir) {
      sir_step(ensemble, z_t, model, kernel, config.alpha, config.sir_temperature, streams, config.threads);
    } else {
      const bool auxiliary = config.method == Method::kAuxiliaryImplicit;
      const VectorXd* z_next = auxiliary && t < horizon ? &observations[static_cast<std::size_t>(t)] : nullptr;
      const bool divide = auxiliary && t >= 3;
      DebugRow row;
      parallel_for(n, config.threads, [&](Index s) {
        Particle& p = ensemble.particles[static_cast<std::size_t>(s)];
        Rng rng = streams.engine(Stream::kPropagation, tag(t), tag(s));
        const VectorXd forecast = step(p.state(), model.dim(), kernel, config.alpha);
        const GaussianProposal q =
            auxiliary_proposal(forecast, z_t, z_next, model, kernel, config.alpha, config.jacobian, config.lookahead);
        ProposalDraw draw = sample_proposal(q, rng);
        p.log_weight += incremental_log_weight(forecast, draw.x, z_t, z_next, divide, draw.log_density, model,
                                               kernel, config.alpha, config.lookahead);
        if (config.debug_dump && s == 0)
          row = {t, implicit_map_from_forecast(forecast, z_t, model), q.mean(), q.precision().diagonal()};
        p.advance(std::move(draw.x), ensemble.window);
      });
      ensemble.t = t;
      if (config.debug_dump) result.debug.push_back(std::move(row));
    }
    sanitize(ensemble, t);

    const double current_ess = ess(ensemble.log_weights());
    result.ess_trace.push_back(current_ess);
    ensemble.snapshot();
    if (!(current_ess < config.resample_threshold_fraction * static_cast<double>(n))) continue;

    MoveEvent event;
    event.t = t;
    ctx.t = t;
    if (moves_on) event.local = local_trajectory_move(ensemble, ctx, streams, config.threads);

    Rng resampling = streams.engine(Stream::kResampling, tag(t));
    resample(ensemble, resampling);
    ensemble.resample_log.push_back(t);
    result.resample_steps.push_back(t);

    if (moves_on) {
      std::vector<MoveStats> directional(static_cast<std::size_t>(n)), information(static_cast<std::size_t>(n));
      parallel_for(n, config.threads, [&](Index s) {
        Particle& p = ensemble.particles[static_cast<std::size_t>(s)];
        Rng drng = streams.engine(Stream::kDirectionalMove, tag(t), tag(s));
        directional[static_cast<std::size_t>(s)] = directional_move(p, ctx, drng);
        Rng irng = streams.engine(Stream::kInformationMove, tag(t), tag(s));
        information[static_cast<std::size_t>(s)] = information_move(p, ctx, irng);
      });
      for (Index s = 0; s < n; ++s) {
        event.directional += directional[static_cast<std::size_t>(s)];
        event.information += information[static_cast<std::size_t>(s)];
      }
      if (event.information.exhausted > 0)
        result.warnings.push_back("t=" + std::to_string(t) + ": information move exhausted its retries for " +
                                  std::to_string(event.information.exhausted) + " particle(s)");
      result.move_events.push_back(event);
    }
  }
  return result;
}

}  // namespace opinion_smc
