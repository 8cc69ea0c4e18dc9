#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>
#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout (and stderr when asked).
Outcome run(const std::string& args, bool merge_stderr = false, const std::string& env = "") {
  const std::string cmd = env + " \"" + std::string(OPINION_SMC_CLI) + "\" " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe) != nullptr) o.out += buf.data();
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("opinion_smc_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path small_config(const std::filesystem::path& dir) {
  const auto path = dir / "small.toml";
  std::ofstream(path) << "N = 6\nN1 = 3\nT = 10\nS = 20\ninitial_box = 1.5\nout = \"" << (dir / "out").string()
                      << "\"\n";
  return path;
}

}  // namespace

TEST_CASE("rankcheck prints the observability table") {
  const Outcome o = run("rankcheck");
  CHECK(o.code == 0);
  CHECK(o.out.rfind("N,d,N1,rank,expected,full_rank\n", 0) == 0);
  CHECK(count_lines(o.out) == 1 + 66);
}

TEST_CASE("usage and config errors exit with code 2 and JSON") {
  const auto dir = scratch("errors");
  const auto bad = dir / "bad.toml";
  std::ofstream(bad) << "N = 1\n";
  for (const std::string& args : std::vector<std::string>{"predict --config " + bad.string(), "predict --method pf", "predict --noise loud",
                                 "predict --seed -3", "frobnicate"}) {
    const Outcome o = run(args, true);
    CHECK(o.code == 2);
    const auto err = nlohmann::json::parse(o.out.substr(0, o.out.find('\n')));
    CHECK(err["exit_code"] == 2);
    CHECK(err.contains("message"));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("predict runs end to end and seeds resolve by precedence") {
  const auto dir = scratch("predict");
  const auto config = small_config(dir);
  const Outcome o = run("predict --config " + config.string() + " --seed 7", false, "OPINION_SMC_SEED=9");
  REQUIRE(o.code == 0);
  CHECK(std::filesystem::exists(dir / "out" / "ais-7" / "report.json"));

  const Outcome env = run("simulate --config " + config.string() + " --method sir", false, "OPINION_SMC_SEED=9");
  REQUIRE(env.code == 0);
  CHECK(std::filesystem::exists(dir / "out" / "sir-9" / "truth.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "sir-9" / "ess.csv"));

  const Outcome plain = run("filter --config " + config.string(), false, "env -u OPINION_SMC_SEED");
  REQUIRE(plain.code == 0);
  CHECK(std::filesystem::exists(dir / "out" / "ais-1" / "ess.csv"));
  CHECK_FALSE(std::filesystem::exists(dir / "out" / "ais-1" / "report.json"));
  std::filesystem::remove_all(dir);
}
