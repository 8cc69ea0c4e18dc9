#include "opinion_smc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "opinion_smc/errors.hpp"
#include "opinion_smc/parallel.hpp"

namespace opinion_smc {

using Json = nlohmann::ordered_json;

namespace {

constexpr int kMaxTruthAttempts = 100;
constexpr double kCenterTolerance = 0.1;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_file(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

Json vector_json(const VectorXd& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

Json clusters_json(const ClusterSet& c) {
  Json sizes = Json::array();
  Json centers = Json::array();
  for (Index k = 0; k < c.n_clusters(); ++k) {
    sizes.push_back(c.sizes[k]);
    centers.push_back(vector_json(c.centers[k]));
  }
  return {{"sizes", sizes}, {"centers", centers}};
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json metrics_json(const RunMetrics& m) {
  Json out;
  out["L"] = kCenterTolerance;
  for (int r = 0; r < 2; ++r) {
    Json row;
    for (int k = 0; k < 3; ++k) row["K" + std::to_string(k)] = m.omega[r][k];
    out["omega" + std::to_string(r + 1)] = row;
  }
  out["e1"] = number_or_null(m.size_error[0]);
  out["e2"] = number_or_null(m.size_error[1]);
  return out;
}

std::string noise_label(const ExperimentConfig& c) { return c.sigma_xi_truth > 0.0 ? "on" : "off"; }

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

StreamTree run_streams(std::uint64_t seed, int run) {
  return StreamTree(seed).child(Stream::kRun).child(static_cast<std::uint64_t>(run));
}

Truth generate_truth(const ExperimentConfig& config, const StreamTree& streams) {
  config.validate();
  const InitialDistribution box = InitialDistribution::uniform_box(config.initial_box);
  const Index n = config.n_agents * config.dim;
  for (int attempt = 0; attempt < kMaxTruthAttempts; ++attempt) {
    Rng rng = streams.engine(Stream::kInitialCondition, static_cast<std::uint64_t>(attempt));
    const OpinionState x1(box.sample(n, rng), config.dim);
    auto roll = roll_to_clusters(x1, config.kernel, config.alpha, config.max_predict_steps);
    if (!roll || roll->clusters.n_clusters() < 2) continue;

    Truth truth;
    truth.attempts = attempt + 1;
    truth.clusters = std::move(roll->clusters);
    truth.clustering_steps = roll->steps;
    truth.trajectory.push_back(x1.positions());
    for (int t = 2; t <= config.horizon; ++t)
      truth.trajectory.push_back(step(truth.trajectory.back(), config.dim, config.kernel, config.alpha));

    const ObservationModel model = config.truth_model();
    Rng noise = streams.engine(Stream::kObservationNoise);
    for (const auto& x : truth.trajectory) {
      VectorXd z = observe(x, model);
      if (config.sigma_xi_truth > 0.0) z += config.sigma_xi_truth * standard_normal(z.size(), noise);
      truth.observations.push_back(std::move(z));
    }
    return truth;
  }
  throw ConfigError("no initial condition out of " + std::to_string(kMaxTruthAttempts) +
                    " led to a resolved multi-cluster state");
}

RunMetrics evaluate(const ClusterSet& truth, const std::vector<ClusterEstimate>& estimates) {
  RunMetrics m;
  for (Index r = 0; r < 2; ++r) {
    for (int k = 0; k < 3; ++k)
      m.omega[r][k] = r < truth.n_clusters() ? success_indicator(truth, estimates, r, kCenterTolerance, k) : 0;
    m.size_error[r] = r < truth.n_clusters() && r < static_cast<Index>(estimates.size())
                          ? size_error(truth, estimates, r)
                          : std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

RunResult run_single(const ExperimentConfig& config, int run, Stage stage, bool debug_dump) {
  config.validate();
  RunResult result;
  result.run = run;
  result.seed = config.seed;
  const StreamTree streams = run_streams(config.seed, run);

  auto start = std::chrono::steady_clock::now();
  result.truth = generate_truth(config, streams);
  result.truth_seconds = seconds_since(start);
  if (stage == Stage::kTruth) return result;

  start = std::chrono::steady_clock::now();
  FilterConfig filter_config = config.filter_config();
  filter_config.debug_dump = debug_dump;
  result.filter = run_filter(result.truth.observations, config.filter_model(), config.kernel, filter_config,
                             streams.child(Stream::kFilter));
  result.filter_seconds = seconds_since(start);
  if (stage == Stage::kFilter) return result;

  start = std::chrono::steady_clock::now();
  const Ensemble& ensemble = result.filter.ensemble;
  result.posterior = predict_clusters(ensemble.states(), ensemble.log_weights(), config.dim, config.kernel,
                                      config.alpha, config.max_predict_steps, config.threads);
  result.estimates = posterior_estimates(*result.posterior);
  result.metrics = evaluate(result.truth.clusters, result.estimates);
  try {
    result.observation_only = predict_from_observation_only(result.truth.observations.back(), config.dim,
                                                            config.n_agents, config.kernel, config.alpha,
                                                            config.max_predict_steps);
    result.observation_only_metrics = evaluate(result.truth.clusters, estimates_from(*result.observation_only));
  } catch (const PredictionFailure&) {
  } catch (const InputError&) {
  }
  result.predict_seconds = seconds_since(start);
  return result;
}

std::string report_json(const ExperimentConfig& config, const RunResult& result) {
  Json r;
  r["method"] = std::string(to_string(config.method));
  r["seed"] = result.seed;
  r["run"] = result.run;
  r["N"] = config.n_agents;
  r["d"] = config.dim;
  r["N1"] = config.n_observed;
  r["T"] = config.horizon;
  r["S"] = config.n_particles;
  r["noise"] = noise_label(config);
  Json truth = clusters_json(result.truth.clusters);
  truth["clustering_steps"] = result.truth.clustering_steps;
  r["truth"] = truth;
  Json estimates = Json::array();
  for (const auto& e : result.estimates) estimates.push_back({{"size", e.size}, {"center", vector_json(e.center)}});
  r["estimates"] = estimates;
  r["metrics"] = metrics_json(result.metrics);
  if (result.observation_only) {
    Json obs = clusters_json(*result.observation_only);
    obs["metrics"] = metrics_json(*result.observation_only_metrics);
    r["observation_only"] = obs;
  } else {
    r["observation_only"] = nullptr;
  }
  r["resample_steps"] = result.filter.resample_steps;
  r["final_ess"] = result.filter.ess_trace.empty() ? Json(nullptr) : Json(result.filter.ess_trace.back());
  if (result.posterior) {
    r["unresolved_count"] = result.posterior->unresolved_count();
    Json samples = Json::array();
    for (const auto& s : result.posterior->samples) {
      Json js = clusters_json(s.clusters);
      js["weight"] = s.weight;
      js["resolved"] = s.resolved;
      js["steps"] = s.steps;
      samples.push_back(js);
    }
    r["samples"] = samples;
  }
  return r.dump(2) + "\n";
}

void write_run(const std::filesystem::path& dir, const ExperimentConfig& config, const RunResult& result,
               Stage stage) {
  std::filesystem::create_directories(dir);
  open_file(dir / "config.toml") << serialize_config(config);

  const Index d = config.dim;
  {
    auto out = open_file(dir / "truth.csv");
    out << "t,agent";
    for (Index k = 0; k < d; ++k) out << ",coord_" << k;
    out << "\n";
    for (std::size_t t = 0; t < result.truth.trajectory.size(); ++t) {
      const VectorXd& x = result.truth.trajectory[t];
      for (Index i = 0; i < config.n_agents; ++i) {
        out << t + 1 << "," << i;
        for (Index k = 0; k < d; ++k) out << "," << fmt(x(i * d + k));
        out << "\n";
      }
    }
  }
  {
    auto out = open_file(dir / "obs.csv");
    out << "t";
    for (Index k = 0; k < config.n_observed * d; ++k) out << ",obs_" << k;
    out << "\n";
    for (std::size_t t = 0; t < result.truth.observations.size(); ++t) {
      out << t + 1;
      for (double v : result.truth.observations[t]) out << "," << fmt(v);
      out << "\n";
    }
  }

  Json manifest;
  manifest["method"] = std::string(to_string(config.method));
  manifest["seed"] = result.seed;
  manifest["run"] = result.run;
  manifest["run_seed"] = run_streams(config.seed, result.run).seed();
  manifest["config_hash"] = hex(config_hash(config));
  manifest["threads"] = config.threads;
  manifest["resample_threshold"] = config.resample_threshold_fraction * static_cast<double>(config.n_particles);
  manifest["truth_attempts"] = result.truth.attempts;
  Json timings;
  timings["truth"] = result.truth_seconds;

  if (stage != Stage::kTruth) {
    const Ensemble& ensemble = result.filter.ensemble;
    {
      auto out = open_file(dir / "ess.csv");
      out << "t,ess\n";
      for (std::size_t t = 0; t < result.filter.ess_trace.size(); ++t)
        out << t + 1 << "," << fmt(result.filter.ess_trace[t]) << "\n";
    }
    {
      auto out = open_file(dir / "particles.csv");
      out << "particle,weight";
      for (Index k = 0; k < config.n_agents * d; ++k) out << ",coord_" << k;
      out << "\n";
      const VectorXd w = normalized_weights(ensemble.log_weights());
      for (Index s = 0; s < ensemble.size(); ++s) {
        out << s << "," << fmt(w(s));
        for (double v : ensemble.particles[static_cast<std::size_t>(s)].state()) out << "," << fmt(v);
        out << "\n";
      }
    }
    if (!result.filter.debug.empty()) {
      auto out = open_file(dir / "debug.csv");
      out << "t,coord,map_point,mean,precision_diagonal\n";
      for (const auto& row : result.filter.debug)
        for (Index k = 0; k < row.mean.size(); ++k)
          out << row.t << "," << k << "," << fmt(row.map_point(k)) << "," << fmt(row.mean(k)) << ","
              << fmt(row.precision_diagonal(k)) << "\n";
    }
    manifest["resample_steps"] = result.filter.resample_steps;
    Json events = Json::array();
    for (const auto& e : result.filter.move_events) {
      const auto stats = [](const MoveStats& s) {
        return Json{{"attempted", s.attempted}, {"accepted", s.accepted}, {"draws", s.draws},
                    {"exhausted", s.exhausted}};
      };
      events.push_back({{"t", e.t},
                        {"directional", stats(e.directional)},
                        {"local_trajectory", stats(e.local)},
                        {"information", stats(e.information)}});
    }
    manifest["move_events"] = events;
    manifest["warnings"] = result.filter.warnings;
    timings["filter"] = result.filter_seconds;
  }
  if (stage == Stage::kPredict) {
    open_file(dir / "report.json") << report_json(config, result);
    timings["predict"] = result.predict_seconds;
  }
  manifest["timings_seconds"] = timings;
  open_file(dir / "manifest.json") << manifest.dump(2) << "\n";
}

BatchSummary run_batch(const ExperimentConfig& config, const std::filesystem::path& out) {
  config.validate();
  std::filesystem::create_directories(out);
  ExperimentConfig per_run = config;
  per_run.threads = 1;

  struct Row {
    bool ok = false;
    std::string error;
    RunMetrics metrics;
    Index unresolved = 0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(config.runs));
  parallel_for(config.runs, config.threads, [&](Index r) {
    Row& row = rows[static_cast<std::size_t>(r)];
    char name[32];
    std::snprintf(name, sizeof name, "run-%04lld", static_cast<long long>(r));
    try {
      const RunResult result = run_single(per_run, static_cast<int>(r));
      write_run(out / name, per_run, result, Stage::kPredict);
      row.ok = true;
      row.metrics = result.metrics;
      row.unresolved = result.posterior->unresolved_count();
    } catch (const std::exception& e) {
      row.error = std::string(name) + ": " + e.what();
    }
  });

  BatchSummary summary;
  summary.runs = config.runs;
  const double ratio = static_cast<double>(config.n_observed) / static_cast<double>(config.n_agents);
  auto csv = open_file(out / "batch.csv");
  csv << "run,seed,ratio,noise,omega1_K0,omega1_K1,omega1_K2,omega2_K0,omega2_K1,omega2_K2,e1,e2,unresolved_count\n";
  std::array<std::array<double, 3>, 2> hits{};
  std::array<std::vector<double>, 2> errors;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Row& row = rows[r];
    if (!row.ok) {
      summary.failures.push_back(row.error);
      continue;
    }
    ++summary.completed;
    csv << r << "," << config.seed << "," << fmt(ratio) << "," << noise_label(config);
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 3; ++j) {
        csv << "," << row.metrics.omega[k][j];
        hits[k][j] += row.metrics.omega[k][j];
      }
    for (int k = 0; k < 2; ++k) {
      csv << "," << fmt(row.metrics.size_error[k]);
      if (std::isfinite(row.metrics.size_error[k])) errors[k].push_back(row.metrics.size_error[k]);
    }
    csv << "," << row.unresolved << "\n";
  }
  summary.degraded = static_cast<double>(summary.failures.size()) > 0.2 * static_cast<double>(config.runs);

  Json js;
  js["runs"] = summary.runs;
  js["completed"] = summary.completed;
  js["degraded"] = summary.degraded;
  js["failures"] = summary.failures;
  Json rates;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 3; ++j)
      rates["omega" + std::to_string(k + 1) + "_K" + std::to_string(j)] =
          summary.completed > 0 ? Json(hits[k][j] / summary.completed) : Json(nullptr);
  js["rates"] = rates;
  Json quantiles;
  for (int k = 0; k < 2; ++k) {
    Json q;
    if (!errors[k].empty())
      for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) q[fmt(p)] = quantile(errors[k], p);
    quantiles["e" + std::to_string(k + 1)] = q.is_null() ? Json::object() : q;
  }
  js["error_quantiles"] = quantiles;
  open_file(out / "summary.json") << js.dump(2) << "\n";
  return summary;
}

}  // namespace opinion_smc
