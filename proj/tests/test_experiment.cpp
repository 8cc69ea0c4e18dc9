#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "opinion_smc/errors.hpp"
#include "opinion_smc/experiment.hpp"

using namespace opinion_smc;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_agents = 8;
  c.n_observed = 4;
  c.horizon = 10;
  c.n_particles = 20;
  c.initial_box = 2.0;
  c.seed = 11;
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("opinion_smc_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int line_count(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("run streams differ by seed and run") {
  CHECK(run_streams(1, 0).seed() == run_streams(1, 0).seed());
  CHECK(run_streams(1, 0).seed() != run_streams(1, 1).seed());
  CHECK(run_streams(1, 0).seed() != run_streams(2, 0).seed());
}

TEST_CASE("generated truth follows the noiseless dynamics") {
  const ExperimentConfig c = small_config();
  const Truth truth = generate_truth(c, run_streams(c.seed, 0));
  REQUIRE(truth.trajectory.size() == 10);
  REQUIRE(truth.observations.size() == 10);
  CHECK(truth.clusters.n_clusters() >= 2);
  CHECK(truth.attempts >= 1);
  CHECK(truth.trajectory.front().cwiseAbs().maxCoeff() <= c.initial_box);
  const ObservationModel m = c.truth_model();
  for (std::size_t t = 0; t < truth.trajectory.size(); ++t) {
    CHECK(truth.observations[t] == observe(truth.trajectory[t], m));
    if (t > 0) CHECK(truth.trajectory[t] == step(truth.trajectory[t - 1], c.dim, c.kernel, c.alpha));
  }
  const auto rolled = roll_to_clusters(OpinionState(truth.trajectory.front(), c.dim), c.kernel, c.alpha,
                                       c.max_predict_steps);
  REQUIRE(rolled.has_value());
  CHECK(rolled->clusters.sizes == truth.clusters.sizes);
  CHECK(rolled->steps == truth.clustering_steps);

  ExperimentConfig noisy = c;
  apply_noise_preset(noisy, true);
  const Truth with_noise = generate_truth(noisy, run_streams(c.seed, 0));
  CHECK(with_noise.observations[0] != observe(with_noise.trajectory[0], noisy.truth_model()));
}

TEST_CASE("consensus-only initial conditions are rejected") {
  ExperimentConfig c = small_config();
  c.initial_box = 0.1;
  CHECK_THROWS_AS(generate_truth(c, run_streams(c.seed, 0)), ConfigError);
}

TEST_CASE("perfect estimates score everywhere") {
  ClusterSet truth;
  truth.sizes = {5, 3};
  truth.centers = {VectorXd::Zero(2), VectorXd::Ones(2)};
  truth.partition.resize(2);
  const RunMetrics m = evaluate(truth, estimates_from(truth));
  for (int r = 0; r < 2; ++r) {
    for (int k = 0; k < 3; ++k) CHECK(m.omega[r][k] == 1);
    CHECK(m.size_error[r] == 0.0);
  }
  const RunMetrics one = evaluate(truth, {estimates_from(truth)[0]});
  CHECK(one.omega[1][2] == 0);
  CHECK(std::isnan(one.size_error[1]));
}

TEST_CASE("pipeline stages and outputs") {
  const ExperimentConfig c = small_config();
  const RunResult truth_only = run_single(c, 0, Stage::kTruth);
  CHECK(truth_only.filter.ess_trace.empty());
  CHECK_FALSE(truth_only.posterior.has_value());

  const RunResult full = run_single(c, 0, Stage::kPredict);
  CHECK(full.filter.ess_trace.size() == 10);
  REQUIRE(full.posterior.has_value());
  CHECK(full.posterior->samples.size() == 20);
  CHECK_FALSE(full.estimates.empty());
  CHECK(report_json(c, full) == report_json(c, run_single(c, 0, Stage::kPredict)));

  const auto dir = scratch("run");
  write_run(dir, c, full, Stage::kPredict);
  for (const char* f : {"config.toml", "manifest.json", "truth.csv", "obs.csv", "ess.csv", "particles.csv",
                        "report.json"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK_FALSE(std::filesystem::exists(dir / "debug.csv"));
  CHECK(parse_config(slurp(dir / "config.toml")) == c);
  CHECK(line_count(dir / "truth.csv") == 1 + 10 * 8);
  CHECK(line_count(dir / "obs.csv") == 1 + 10);
  CHECK(line_count(dir / "particles.csv") == 1 + 20);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["timings_seconds"].contains("predict"));
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report["truth"]["sizes"].size() == full.truth.clusters.sizes.size());
  CHECK_FALSE(report.contains("timings_seconds"));

  const auto truth_dir = scratch("truth");
  write_run(truth_dir, c, truth_only, Stage::kTruth);
  CHECK(std::filesystem::exists(truth_dir / "truth.csv"));
  CHECK_FALSE(std::filesystem::exists(truth_dir / "ess.csv"));
  CHECK_FALSE(std::filesystem::exists(truth_dir / "report.json"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(truth_dir);
}

TEST_CASE("batch writes per-run directories and summaries") {
  ExperimentConfig c = small_config();
  c.runs = 3;
  c.threads = 2;
  const auto dir = scratch("batch");
  const BatchSummary s = run_batch(c, dir);
  CHECK(s.runs == 3);
  CHECK(s.completed + static_cast<int>(s.failures.size()) == 3);
  CHECK(std::filesystem::exists(dir / "run-0000" / "report.json"));
  CHECK(line_count(dir / "batch.csv") == 1 + s.completed);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["runs"] == 3);
  CHECK(summary["rates"].contains("omega1_K0"));

  // Per-run results do not depend on the worker count.
  ExperimentConfig serial = c;
  serial.threads = 1;
  const auto dir1 = scratch("batch_serial");
  run_batch(serial, dir1);
  CHECK(slurp(dir / "batch.csv") == slurp(dir1 / "batch.csv"));
  CHECK(slurp(dir / "run-0002" / "report.json") == slurp(dir1 / "run-0002" / "report.json"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir1);
}
