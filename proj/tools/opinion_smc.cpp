#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "opinion_smc/config.hpp"
#include "opinion_smc/errors.hpp"
#include "opinion_smc/experiment.hpp"
#include "opinion_smc/state_space.hpp"

namespace {

using namespace opinion_smc;

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kFilter = 3, kPredict = 4 };

int fail(ExitCode code, const std::string& kind, const std::string& message, std::optional<int> step = {}) {
  nlohmann::ordered_json err{{"error", kind}, {"message", message}, {"exit_code", static_cast<int>(code)}};
  if (step) err["step"] = *step;
  std::cerr << err.dump() << "\n";
  return code;
}

std::uint64_t parse_seed(const std::string& text, const char* source) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used, 10);
    if (used == text.size() && !text.empty() && text.front() != '-') return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(std::string("invalid seed from ") + source + ": " + text);
}

struct Options {
  std::string config_path;
  std::optional<std::string> seed;
  std::optional<std::string> method;
  std::optional<double> ratio;
  std::optional<std::string> noise;
  std::optional<std::string> out;
  std::optional<int> runs;
  std::optional<int> threads;
  bool debug_dump = false;
};

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) {
    c.seed = parse_seed(*o.seed, "--seed");
  } else if (const char* env = std::getenv("OPINION_SMC_SEED")) {
    c.seed = parse_seed(env, "OPINION_SMC_SEED");
  }
  if (o.method) {
    try {
      c.method = parse_method(*o.method);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.noise) {
    if (*o.noise != "on" && *o.noise != "off") throw ConfigError("--noise must be on or off");
    apply_noise_preset(c, *o.noise == "on");
  }
  if (o.ratio) apply_observation_ratio(c, *o.ratio);
  if (o.out) c.out = *o.out;
  if (o.runs) c.runs = *o.runs;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

std::filesystem::path run_dir(const ExperimentConfig& c) {
  return std::filesystem::path(c.out) / (std::string(to_string(c.method)) + "-" + std::to_string(c.seed));
}

int rankcheck() {
  std::cout << "N,d,N1,rank,expected,full_rank\n";
  for (Index n = 3; n <= 8; ++n)
    for (Index d = 1; d <= 2; ++d)
      for (Index n1 = 1; n1 <= n; ++n1) {
        const Index rank = observability_rank(n, d, n1, 0.05);
        const Index expected = std::min((n1 + 1) * d, n * d);
        std::cout << n << "," << d << "," << n1 << "," << rank << "," << expected << ","
                  << (rank == n * d ? 1 : 0) << "\n";
      }
  return kOk;
}

int execute(const std::string& command, const Options& o) {
  if (command == "rankcheck") return rankcheck();
  ExperimentConfig c = resolve(o);
  if (command == "batch") {
    const BatchSummary s = run_batch(c, c.out);
    std::cout << nlohmann::ordered_json{{"out", c.out}, {"runs", s.runs}, {"completed", s.completed},
                                        {"degraded", s.degraded}}
                     .dump()
              << "\n";
    return kOk;
  }
  const Stage stage = command == "simulate" ? Stage::kTruth : command == "filter" ? Stage::kFilter : Stage::kPredict;
  const RunResult result = run_single(c, 0, stage, o.debug_dump);
  const auto dir = run_dir(c);
  write_run(dir, c, result, stage);
  std::cout << nlohmann::ordered_json{{"out", dir.string()}}.dump() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster prediction for opinion dynamics by sequential Monte Carlo"};
  app.require_subcommand(1);
  Options o;
  for (const char* name : {"simulate", "filter", "predict", "batch", "rankcheck"}) {
    CLI::App* sub = app.add_subcommand(name);
    if (std::string(name) == "rankcheck") continue;
    sub->add_option("--config", o.config_path, "TOML configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides OPINION_SMC_SEED and the config)");
    sub->add_option("--method", o.method, "sir, is or ais");
    sub->add_option("--ratio", o.ratio, "observed fraction of agents");
    sub->add_option("--noise", o.noise, "on or off");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--runs", o.runs, "batch size");
    sub->add_option("--threads", o.threads, "worker threads");
    sub->add_flag("--debug-dump", o.debug_dump, "write per-step proposal internals of particle 0");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(kConfig, "usage", e.what());
  }

  try {
    return execute(app.get_subcommands().front()->get_name(), o);
  } catch (const ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const InputError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const FilterFailure& e) {
    return fail(kFilter, "filter", e.what(), e.step());
  } catch (const DegenerateEnsembleError& e) {
    return fail(kFilter, "filter", e.what());
  } catch (const PredictionFailure& e) {
    return fail(kPredict, "prediction", e.what());
  } catch (const std::exception& e) {
    return fail(kOther, "internal", e.what());
  }
}
