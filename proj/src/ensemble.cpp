#include "opinion_smc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "opinion_smc/errors.hpp"

namespace opinion_smc {

void Particle::advance(VectorXd next, std::size_t window) {
  history.push_back(std::move(next));
  while (history.size() > std::max<std::size_t>(window, 1)) history.pop_front();
}

VectorXd Ensemble::log_weights() const {
  VectorXd lw(size());
  for (Index s = 0; s < size(); ++s) lw(s) = particles[s].log_weight;
  return lw;
}

std::vector<VectorXd> Ensemble::states() const {
  std::vector<VectorXd> out;
  out.reserve(particles.size());
  for (const auto& p : particles) out.push_back(p.state());
  return out;
}

void Ensemble::snapshot() {
  snapshots.push_back({t, states(), log_weights()});
  while (snapshots.size() > std::max<std::size_t>(window, 1)) snapshots.pop_front();
}

const EnsembleSnapshot* Ensemble::snapshot_at(int step) const {
  for (const auto& snap : snapshots)
    if (snap.t == step) return &snap;
  return nullptr;
}

double log_sum_exp(const Eigen::Ref<const VectorXd>& log_values) {
  if (log_values.size() == 0) return -std::numeric_limits<double>::infinity();
  const double top = log_values.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((log_values.array() - top).exp().sum());
}

VectorXd normalized_weights(const Eigen::Ref<const VectorXd>& log_weights) {
  if (log_weights.hasNaN()) throw DegenerateEnsembleError("NaN log-weight");
  const double total = log_sum_exp(log_weights);
  if (!std::isfinite(total)) throw DegenerateEnsembleError("no particle has positive weight");
  return (log_weights.array() - total).exp();
}

double ess(const Eigen::Ref<const VectorXd>& log_weights) {
  if (log_weights.hasNaN()) throw DegenerateEnsembleError("NaN log-weight");
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw DegenerateEnsembleError("no particle has positive weight");
  return std::exp(2.0 * lse - log_sum_exp(2.0 * log_weights));
}

std::vector<Index> systematic_resample(const Eigen::Ref<const VectorXd>& weights, double u) {
  const Index n = weights.size();
  if (n == 0) throw InputError("cannot resample an empty ensemble");
  if (!(u >= 0.0) || !(u < 1.0 / static_cast<double>(n))) throw InputError("offset must lie in [0, 1/S)");
  Index last = n - 1;
  while (last > 0 && !(weights(last) > 0.0)) --last;

  std::vector<Index> parents(static_cast<std::size_t>(n));
  Index i = 0;
  double cumulative = weights(0);
  for (Index j = 0; j < n; ++j) {
    const double grid = u + static_cast<double>(j) / static_cast<double>(n);
    while (i < last && cumulative <= grid) cumulative += weights(++i);
    parents[static_cast<std::size_t>(j)] = i;
  }
  return parents;
}

std::vector<Index> systematic_resample(const Eigen::Ref<const VectorXd>& weights, Rng& rng) {
  const double width = 1.0 / static_cast<double>(weights.size());
  double u = std::uniform_real_distribution<double>(0.0, width)(rng);
  if (u >= width) u = 0.0;
  return systematic_resample(weights, u);
}

void resample(Ensemble& ensemble, Rng& rng) {
  const VectorXd w = normalized_weights(ensemble.log_weights());
  const auto parents = systematic_resample(w, rng);
  std::vector<Particle> next;
  next.reserve(parents.size());
  for (Index p : parents) next.push_back(ensemble.particles[static_cast<std::size_t>(p)]);
  const double uniform = -std::log(static_cast<double>(next.size()));
  for (auto& p : next) p.log_weight = uniform;
  ensemble.particles = std::move(next);
}

InitialDistribution InitialDistribution::uniform_box(double half_width) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw InputError("box half-width must be positive");
  InitialDistribution d;
  d.kind = Kind::kUniformBox;
  d.half_width = half_width;
  return d;
}

InitialDistribution InitialDistribution::gaussian(double mean, double sd) {
  if (!std::isfinite(mean) || !(sd > 0.0) || !std::isfinite(sd)) throw InputError("invalid Gaussian prior");
  InitialDistribution d;
  d.kind = Kind::kGaussian;
  d.mean = mean;
  d.sd = sd;
  return d;
}

double InitialDistribution::sample(Rng& rng) const {
  if (kind == Kind::kUniformBox) return std::uniform_real_distribution<double>(-half_width, half_width)(rng);
  return std::normal_distribution<double>(mean, sd)(rng);
}

VectorXd InitialDistribution::sample(Index n, Rng& rng) const {
  VectorXd out(n);
  for (Index i = 0; i < n; ++i) out(i) = sample(rng);
  return out;
}

double InitialDistribution::log_density(double x) const {
  if (kind == Kind::kUniformBox)
    return std::abs(x) <= half_width ? -std::log(2.0 * half_width) : -std::numeric_limits<double>::infinity();
  const double r = (x - mean) / sd;
  return -0.5 * r * r - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

namespace {

constexpr int kMaxTruncatedDraws = 1'000'000;

double truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng) {
  std::normal_distribution<double> normal(mu, sigma);
  for (int k = 0; k < kMaxTruncatedDraws; ++k) {
    const double x = normal(rng);
    if (x >= lo && x <= hi) return x;
  }
  throw NumericalError("observation lies too far outside the prior box");
}

}  // namespace

VectorXd sample_initial_posterior(const InitialDistribution& prior, const Eigen::Ref<const VectorXd>& z1,
                                  const ObservationModel& model, Rng& rng) {
  if (z1.size() != model.observation_size()) throw InputError("observation size does not match the model");
  if (!(model.sigma_xi() > 0.0)) throw DegenerateDensityError("observation noise is zero");
  const Index d = model.dim();
  VectorXd x = prior.sample(model.state_size(), rng);
  const double vx = model.sigma_xi() * model.sigma_xi();
  for (Index j = 0; j < model.n_observed(); ++j) {
    const Index at = model.observed()[j] * d;
    for (Index k = 0; k < d; ++k) {
      const double z = z1(j * d + k);
      if (prior.kind == InitialDistribution::Kind::kUniformBox) {
        x(at + k) = truncated_normal(z, model.sigma_xi(), -prior.half_width, prior.half_width, rng);
      } else {
        const double vp = prior.sd * prior.sd;
        const double var = 1.0 / (1.0 / vp + 1.0 / vx);
        const double mu = var * (prior.mean / vp + z / vx);
        x(at + k) = std::normal_distribution<double>(mu, std::sqrt(var))(rng);
      }
    }
  }
  return x;
}

}  // namespace opinion_smc
