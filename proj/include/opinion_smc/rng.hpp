#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "opinion_smc/linalg.hpp"

namespace opinion_smc {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Hashes a seed together with a path of integer tags into a new seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t tag : path) h = splitmix64(h ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
  return h;
}

/// Stream purposes. A run's master seed fans out into one independent
/// substream per (purpose, step, particle) so results never depend on the
/// order in which particles are processed.
enum class Stream : std::uint64_t {
  kRun = 1,
  kInitialCondition,
  kObservationNoise,
  kFilter,
  kInitialParticles,
  kPropagation,
  kResampling,
  kDirectionalMove,
  kLocalTrajectoryMove,
  kInformationMove,
};

class StreamTree {
 public:
  explicit StreamTree(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  StreamTree child(Stream purpose) const {
    return StreamTree(derive_seed(seed_, {static_cast<std::uint64_t>(purpose)}));
  }
  StreamTree child(std::uint64_t tag) const { return StreamTree(derive_seed(seed_, {tag})); }

  Rng engine(Stream purpose, std::uint64_t a = 0, std::uint64_t b = 0) const {
    return Rng(derive_seed(seed_, {static_cast<std::uint64_t>(purpose), a, b}));
  }

 private:
  std::uint64_t seed_;
};

inline VectorXd standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  VectorXd out(n);
  for (Index i = 0; i < n; ++i) out(i) = normal(rng);
  return out;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace opinion_smc
