#include "opinion_smc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "opinion_smc/errors.hpp"

namespace opinion_smc {

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (n_agents < 2) fail("N must be at least 2");
  if (dim < 1) fail("d must be at least 1");
  if (n_observed < 1 || n_observed > n_agents) fail("N1 must lie in [1, N]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive");
  if (horizon < 1) fail("T must be at least 1");
  if (method == Method::kImplicit && horizon < 2) fail("implicit sampling needs T >= 2");
  if (method == Method::kAuxiliaryImplicit && horizon < 3) fail("AIS needs T >= 3");
  if (n_particles < 1) fail("S must be at least 1");
  if (!(sigma_eps > 0.0)) fail("sigma_eps must be positive");
  if (!(sigma_xi_filter > 0.0)) fail("sigma_xi_filter must be positive");
  if (!(sigma_xi_truth >= 0.0)) fail("sigma_xi_truth must be nonnegative");
  if (!(resample_threshold_fraction >= 0.0 && resample_threshold_fraction <= 1.0))
    fail("resample_threshold_fraction must lie in [0, 1]");
  if (!(sir_temperature > 0.0)) fail("sir_temperature must be positive");
  if (!(initial_box > 0.0) || !std::isfinite(initial_box)) fail("initial_box must be positive");
  if (runs < 1) fail("runs must be at least 1");
  if (threads < 1) fail("threads must be at least 1");
  if (max_predict_steps < 0) fail("max_predict_steps must be nonnegative");
  try {
    moves.validate();
  } catch (const InputError& e) {
    fail(e.what());
  }
}

ObservationModel ExperimentConfig::truth_model() const {
  return ObservationModel::first_agents(n_agents, dim, n_observed, sigma_xi_truth, sigma_eps);
}

ObservationModel ExperimentConfig::filter_model() const {
  return ObservationModel::first_agents(n_agents, dim, n_observed, sigma_xi_filter, sigma_eps);
}

FilterConfig ExperimentConfig::filter_config() const {
  FilterConfig fc;
  fc.method = method;
  fc.n_particles = n_particles;
  fc.alpha = alpha;
  fc.resample_threshold_fraction = resample_threshold_fraction;
  fc.sir_temperature = sir_temperature;
  fc.jacobian = jacobian;
  fc.lookahead = lookahead;
  fc.prior = InitialDistribution::uniform_box(initial_box);
  fc.moves_enabled = moves_enabled;
  fc.moves = moves;
  fc.threads = threads;
  return fc;
}

namespace {

const std::set<std::string> kTopKeys = {
    "N", "d", "N1", "alpha", "T", "S", "sigma_eps", "sigma_xi_truth", "sigma_xi_filter", "method", "seed",
    "resample_threshold_fraction", "sir_temperature", "jacobian", "lookahead", "initial_box", "runs", "out", "threads",
    "max_predict_steps", "kernel", "moves"};
const std::set<std::string> kKernelKeys = {"breakpoints", "values"};
const std::set<std::string> kMoveKeys = {"enabled", "beta", "T0", "t0", "tol_fraction",
                                         "max_info_retries", "gd_iters", "acceptance"};

void reject_unknown(const toml::table& table, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, node] : table)
    if (!known.contains(std::string(key.str()))) throw ConfigError("unknown key " + where + std::string(key.str()));
}

template <typename T>
void read(const toml::table& table, const char* key, T& target) {
  const toml::node* node = table.get(key);
  if (node == nullptr) return;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) {
      target = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) {
      target = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) {
      target = *v;
      return;
    }
  } else {
    if (node->is_integer()) {
      const auto v = node->as_integer()->get();
      if (v < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
          v > static_cast<std::int64_t>(std::numeric_limits<T>::max()))
        throw ConfigError(std::string("value out of range for key ") + key);
      target = static_cast<T>(v);
      return;
    }
  }
  throw ConfigError(std::string("wrong type for key ") + key);
}

std::vector<double> read_doubles(const toml::table& table, const char* key) {
  const toml::array* arr = table.get_as<toml::array>(key);
  if (arr == nullptr) throw ConfigError(std::string("kernel.") + key + " must be an array");
  std::vector<double> out;
  for (const auto& el : *arr) {
    auto v = el.value<double>();
    if (!v) throw ConfigError(std::string("kernel.") + key + " must hold numbers");
    out.push_back(*v);
  }
  return out;
}

std::uint64_t read_seed(const toml::node& node) {
  if (node.is_integer()) {
    const auto v = node.as_integer()->get();
    if (v < 0) throw ConfigError("seed must be nonnegative");
    return static_cast<std::uint64_t>(v);
  }
  if (auto s = node.value<std::string>()) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(*s, &used, 10);
      if (used != s->size() || s->front() == '-') throw ConfigError("invalid seed string");
      return v;
    } catch (const std::logic_error&) {
      throw ConfigError("invalid seed string");
    }
  }
  throw ConfigError("seed must be an integer");
}

template <typename Fn>
auto translate(Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string list(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + number(values[i]);
  return out + "]";
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
  }
  reject_unknown(root, kTopKeys, "");

  ExperimentConfig c;
  read(root, "N", c.n_agents);
  read(root, "d", c.dim);
  read(root, "N1", c.n_observed);
  read(root, "alpha", c.alpha);
  read(root, "T", c.horizon);
  read(root, "S", c.n_particles);
  read(root, "sigma_eps", c.sigma_eps);
  read(root, "sigma_xi_truth", c.sigma_xi_truth);
  read(root, "sigma_xi_filter", c.sigma_xi_filter);
  read(root, "resample_threshold_fraction", c.resample_threshold_fraction);
  read(root, "sir_temperature", c.sir_temperature);
  read(root, "initial_box", c.initial_box);
  read(root, "runs", c.runs);
  read(root, "out", c.out);
  read(root, "threads", c.threads);
  read(root, "max_predict_steps", c.max_predict_steps);
  if (const toml::node* seed = root.get("seed")) c.seed = read_seed(*seed);

  std::string name;
  if (root.contains("method")) {
    read(root, "method", name);
    c.method = translate([&] { return parse_method(name); });
  }
  if (root.contains("jacobian")) {
    read(root, "jacobian", name);
    c.jacobian = translate([&] { return parse_jacobian_variant(name); });
  }
  if (root.contains("lookahead")) {
    read(root, "lookahead", name);
    c.lookahead = translate([&] { return parse_lookahead(name); });
  }

  if (const toml::node* node = root.get("kernel")) {
    const toml::table* kernel = node->as_table();
    if (kernel == nullptr) throw ConfigError("kernel must be a table");
    reject_unknown(*kernel, kKernelKeys, "kernel.");
    c.kernel = translate(
        [&] { return InteractionKernel(read_doubles(*kernel, "breakpoints"), read_doubles(*kernel, "values")); });
  }

  if (const toml::node* node = root.get("moves")) {
    const toml::table* moves = node->as_table();
    if (moves == nullptr) throw ConfigError("moves must be a table");
    reject_unknown(*moves, kMoveKeys, "moves.");
    read(*moves, "enabled", c.moves_enabled);
    read(*moves, "beta", c.moves.beta);
    read(*moves, "T0", c.moves.local_window);
    read(*moves, "t0", c.moves.backtrack);
    read(*moves, "tol_fraction", c.moves.tolerance_fraction);
    read(*moves, "max_info_retries", c.moves.max_info_retries);
    read(*moves, "gd_iters", c.moves.gd_iters);
    if (moves->contains("acceptance")) {
      read(*moves, "acceptance", name);
      c.moves.acceptance = translate([&] { return parse_move_acceptance(name); });
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "N = " << c.n_agents << "\n"
      << "d = " << c.dim << "\n"
      << "N1 = " << c.n_observed << "\n"
      << "alpha = " << number(c.alpha) << "\n"
      << "T = " << c.horizon << "\n"
      << "S = " << c.n_particles << "\n"
      << "sigma_eps = " << number(c.sigma_eps) << "\n"
      << "sigma_xi_truth = " << number(c.sigma_xi_truth) << "\n"
      << "sigma_xi_filter = " << number(c.sigma_xi_filter) << "\n"
      << "method = " << quoted(std::string(to_string(c.method))) << "\n";
  if (c.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    out << "seed = " << quoted(std::to_string(c.seed)) << "\n";
  else
    out << "seed = " << c.seed << "\n";
  out << "resample_threshold_fraction = " << number(c.resample_threshold_fraction) << "\n"
      << "sir_temperature = " << number(c.sir_temperature) << "\n"
      << "jacobian = " << quoted(std::string(to_string(c.jacobian))) << "\n"
      << "lookahead = " << quoted(std::string(to_string(c.lookahead))) << "\n"
      << "initial_box = " << number(c.initial_box) << "\n"
      << "runs = " << c.runs << "\n"
      << "out = " << quoted(c.out) << "\n"
      << "threads = " << c.threads << "\n"
      << "max_predict_steps = " << c.max_predict_steps << "\n"
      << "\n[kernel]\n"
      << "breakpoints = " << list(c.kernel.breakpoints()) << "\n"
      << "values = " << list(c.kernel.values()) << "\n"
      << "\n[moves]\n"
      << "enabled = " << (c.moves_enabled ? "true" : "false") << "\n"
      << "beta = " << number(c.moves.beta) << "\n"
      << "T0 = " << c.moves.local_window << "\n"
      << "t0 = " << c.moves.backtrack << "\n"
      << "tol_fraction = " << number(c.moves.tolerance_fraction) << "\n"
      << "max_info_retries = " << c.moves.max_info_retries << "\n"
      << "gd_iters = " << c.moves.gd_iters << "\n"
      << "acceptance = " << quoted(std::string(to_string(c.moves.acceptance))) << "\n";
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void apply_noise_preset(ExperimentConfig& config, bool noisy) {
  if (noisy) {
    config.sigma_xi_truth = 0.01;
    config.sigma_xi_filter = 0.01;
    config.sigma_eps = 0.05;
  } else {
    config.sigma_xi_truth = 0.0;
    config.sigma_xi_filter = 0.005;
    config.sigma_eps = 0.01;
  }
}

void apply_observation_ratio(ExperimentConfig& config, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ConfigError("observation ratio must lie in (0, 1]");
  config.n_observed = std::max<Index>(1, static_cast<Index>(std::lround(ratio * static_cast<double>(config.n_agents))));
}

}  // namespace opinion_smc
