#include "opinion_smc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace opinion_smc {

InteractionKernel::InteractionKernel(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.empty() || breakpoints_.size() != values_.size())
    throw InputError("kernel needs one value per interval");
  double prev = 0.0;
  for (double b : breakpoints_) {
    if (!(b > prev)) throw InputError("kernel breakpoints must be positive and strictly ascending");
    prev = b;
  }
  for (double v : values_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("kernel values must be finite and nonnegative");
}

InteractionKernel InteractionKernel::piecewise_default() {
  return InteractionKernel({std::sqrt(2.0) / 2.0, 1.0}, {1.0, 0.1});
}

InteractionKernel InteractionKernel::global_constant(double value) {
  return InteractionKernel({std::numeric_limits<double>::infinity()}, {value});
}

double InteractionKernel::operator()(double r) const {
  if (!(r >= 0.0)) throw InputError("kernel distance must be nonnegative");
  return at(r);
}

double kernel_eval(const InteractionKernel& kernel, double r) { return kernel(r); }

OpinionState::OpinionState(VectorXd positions, Index dim) : positions_(std::move(positions)), dim_(dim) {
  if (dim_ < 1) throw InputError("opinion dimension must be at least 1");
  if (positions_.size() % dim_ != 0) throw InputError("position vector length is not a multiple of d");
  if (positions_.size() / dim_ < 2) throw InputError("need at least two agents");
  if (!positions_.allFinite()) throw InputError("positions must be finite");
}

OpinionState OpinionState::from_rows(const MatrixXd& rows) {
  VectorXd flat(rows.size());
  for (Index i = 0; i < rows.rows(); ++i) flat.segment(i * rows.cols(), rows.cols()) = rows.row(i).transpose();
  return OpinionState(std::move(flat), rows.cols());
}

VectorXd OpinionState::mean() const {
  return Eigen::Map<const MatrixXd>(positions_.data(), dim_, n_agents()).rowwise().mean();
}

OpinionState step(const OpinionState& state, const InteractionKernel& kernel, double alpha) {
  if (!(alpha > 0.0)) throw InputError("alpha must be positive");
  return OpinionState(step(state.positions(), state.dim(), kernel, alpha), state.dim());
}

std::vector<OpinionState> simulate(const OpinionState& state, const InteractionKernel& kernel,
                                   double alpha, int steps, double process_noise_sigma, Rng& rng) {
  if (steps < 1) throw InputError("simulate needs at least one step");
  if (!(process_noise_sigma >= 0.0)) throw InputError("process noise must be nonnegative");
  std::vector<OpinionState> out;
  out.reserve(static_cast<std::size_t>(steps));
  VectorXd x = state.positions();
  for (int s = 0; s < steps; ++s) {
    x = step(x, state.dim(), kernel, alpha);
    if (process_noise_sigma > 0.0) x += process_noise_sigma * standard_normal(x.size(), rng);
    out.emplace_back(x, state.dim());
  }
  return out;
}

namespace {

MatrixXd pairwise_distances(const OpinionState& state) {
  const Index n = state.n_agents();
  MatrixXd dist(n, n);
  for (Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = (state.agent(i) - state.agent(j)).norm();
  }
  return dist;
}

struct DisjointSets {
  explicit DisjointSets(Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void join(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<Index> parent;
};

}  // namespace

std::optional<ClusterSet> detect_clusters(const OpinionState& state, double radius) {
  if (!(radius > 0.0)) throw InputError("cluster radius must be positive");
  const Index n = state.n_agents();
  const MatrixXd dist = pairwise_distances(state);

  DisjointSets sets(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (dist(i, j) < radius) sets.join(i, j);

  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const bool same = sets.find(i) == sets.find(j);
      if (same && !(dist(i, j) < radius)) return std::nullopt;
      if (!same && !(dist(i, j) > radius)) return std::nullopt;
    }
  }

  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });

  struct Entry {
    std::vector<Index> members;
    VectorXd center;
  };
  std::vector<Entry> entries;
  entries.reserve(groups.size());
  for (auto& g : groups) {
    VectorXd center = VectorXd::Zero(state.dim());
    for (Index i : g) center += state.agent(i);
    center /= static_cast<double>(g.size());
    entries.push_back({std::move(g), std::move(center)});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return std::lexicographical_compare(a.center.begin(), a.center.end(), b.center.begin(), b.center.end());
  });

  ClusterSet out;
  for (auto& e : entries) {
    out.sizes.push_back(static_cast<Index>(e.members.size()));
    out.centers.push_back(std::move(e.center));
    out.partition.push_back(std::move(e.members));
  }
  return out;
}

bool is_nonphysical(std::span<const VectorXd> window, Index dim, int t0, double tol) {
  if (t0 < 1) throw InputError("backtrack length must be at least 1");
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  if (window.size() < static_cast<std::size_t>(t0) + 1) throw InputError("trajectory window shorter than t0");
  const VectorXd& current = window.back();
  const VectorXd& earlier = window[window.size() - 1 - static_cast<std::size_t>(t0)];
  const Index n = earlier.size() / dim;
  const auto earlier_agents = Eigen::Map<const MatrixXd>(earlier.data(), dim, n);
  const auto current_agents = Eigen::Map<const MatrixXd>(current.data(), dim, n);
  const VectorXd center = earlier_agents.rowwise().mean();
  const double earlier_radius = (earlier_agents.colwise() - center).colwise().norm().maxCoeff();
  const double current_radius = (current_agents.colwise() - center).colwise().norm().maxCoeff();
  return current_radius > earlier_radius + tol;
}

bool is_nonphysical(std::span<const OpinionState> window, int t0, double tol) {
  if (window.empty()) throw InputError("empty trajectory window");
  std::vector<VectorXd> flat;
  flat.reserve(window.size());
  for (const auto& s : window) flat.push_back(s.positions());
  return is_nonphysical(flat, window.front().dim(), t0, tol);
}

std::vector<Index> disconnected_unobserved(const OpinionState& state,
                                           std::span<const Index> observed_indices,
                                           const InteractionKernel& kernel) {
  if (observed_indices.empty()) throw InputError("need at least one observed agent");
  const Index n = state.n_agents();
  std::vector<char> reached(static_cast<std::size_t>(n), 0);
  std::queue<Index> frontier;
  for (Index i : observed_indices) {
    if (i < 0 || i >= n) throw InputError("observed index out of range");
    if (!reached[i]) {
      reached[i] = 1;
      frontier.push(i);
    }
  }
  while (!frontier.empty()) {
    const Index i = frontier.front();
    frontier.pop();
    for (Index j = 0; j < n; ++j) {
      if (reached[j]) continue;
      if (kernel.at((state.agent(i) - state.agent(j)).norm()) > 0.0) {
        reached[j] = 1;
        frontier.push(j);
      }
    }
  }
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (!reached[i]) out.push_back(i);
  return out;
}

}  // namespace opinion_smc
