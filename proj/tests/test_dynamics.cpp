#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "opinion_smc/dynamics.hpp"
#include "opinion_smc/errors.hpp"
#include "support/oracles.hpp"

using namespace opinion_smc;

namespace {

VectorXd uniform_state(Index n, Index d, double half_width, Rng& rng) {
  VectorXd x(n * d);
  for (Index i = 0; i < x.size(); ++i) x(i) = half_width * (2.0 * uniform01(rng) - 1.0);
  return x;
}

}  // namespace

TEST_CASE("kernel intervals are half-open") {
  const auto phi = InteractionKernel::piecewise_default();
  const double b = std::numbers::sqrt2 / 2.0;
  CHECK(phi(0.0) == 1.0);
  CHECK(phi(std::nextafter(b, 0.0)) == 1.0);
  CHECK(phi(b) == 0.1);
  CHECK(phi(std::nextafter(1.0, 0.0)) == 0.1);
  CHECK(phi(1.0) == 0.0);
  CHECK(phi(5.0) == 0.0);
  CHECK(phi.support_radius() == 1.0);
}

TEST_CASE("kernel rejects bad input") {
  const auto phi = InteractionKernel::piecewise_default();
  CHECK_THROWS_AS(phi(-0.1), InputError);
  CHECK_THROWS_AS(phi(std::numeric_limits<double>::quiet_NaN()), InputError);
  CHECK_THROWS_AS(InteractionKernel({1.0}, {1.0, 2.0}), InputError);
  CHECK_THROWS_AS(InteractionKernel({1.0, 0.5}, {1.0, 2.0}), InputError);
  CHECK_THROWS_AS(InteractionKernel({1.0}, {-1.0}), InputError);
}

TEST_CASE("global kernel has no cutoff") {
  const auto phi = InteractionKernel::global_constant(2.0);
  CHECK(phi(1e6) == 2.0);
  CHECK(std::isinf(phi.support_radius()));
}

TEST_CASE("state validation") {
  CHECK_THROWS_AS(OpinionState(VectorXd::Zero(3), 2), InputError);
  CHECK_THROWS_AS(OpinionState(VectorXd::Zero(2), 2), InputError);
  VectorXd bad = VectorXd::Zero(4);
  bad(1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(OpinionState(bad, 2), InputError);
  MatrixXd rows(2, 2);
  rows << 1, 2, 3, 4;
  const auto s = OpinionState::from_rows(rows);
  CHECK(s.agent(1)(0) == 3.0);
  CHECK(s.positions()(1) == 2.0);
}

TEST_CASE("step matches a direct pairwise sum") {
  Rng rng(1);
  const auto phi = InteractionKernel::piecewise_default();
  for (int k = 0; k < 50; ++k) {
    const Index n = 2 + k % 12;
    const Index d = 1 + k % 2;
    const VectorXd x = uniform_state(n, d, 1.5, rng);
    const VectorXd ours = step(x, d, phi, 0.05);
    const VectorXd ref = oracle::euler_step(x, static_cast<int>(d), phi.breakpoints(), phi.values(), 0.05);
    CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("step conserves the mean and contracts the radius") {
  Rng rng(2);
  const auto phi = InteractionKernel::piecewise_default();
  for (int k = 0; k < 200; ++k) {
    const OpinionState x(uniform_state(30, 2, 2.0, rng), 2);
    const OpinionState y = step(x, phi, 0.05);
    CHECK((y.mean() - x.mean()).norm() < 1e-13);
    double r0 = 0.0, r1 = 0.0;
    for (Index i = 0; i < 30; ++i) {
      r0 = std::max(r0, (x.agent(i) - x.mean()).norm());
      r1 = std::max(r1, (y.agent(i) - x.mean()).norm());
    }
    CHECK(r1 <= r0);
  }
}

TEST_CASE("step rejects nonpositive alpha") {
  const OpinionState x(VectorXd::Zero(4), 2);
  CHECK_THROWS_AS(step(x, InteractionKernel::piecewise_default(), 0.0), InputError);
}

TEST_CASE("noiseless simulate repeats step") {
  Rng rng(3);
  const auto phi = InteractionKernel::piecewise_default();
  const OpinionState x(uniform_state(8, 2, 1.0, rng), 2);
  const auto path = simulate(x, phi, 0.05, 5, 0.0, rng);
  REQUIRE(path.size() == 5);
  OpinionState y = x;
  for (const auto& s : path) {
    y = step(y, phi, 0.05);
    CHECK(s.positions() == y.positions());
  }
  CHECK_THROWS_AS(simulate(x, phi, 0.05, 0, 0.0, rng), InputError);
  CHECK_THROWS_AS(simulate(x, phi, 0.05, 3, -1.0, rng), InputError);
}

TEST_CASE("cluster detection orders by size and is strict at R") {
  MatrixXd rows(5, 2);
  rows << 0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 5.0, 5.0, 5.2, 5.0;
  const auto c = detect_clusters(OpinionState::from_rows(rows), 1.0);
  REQUIRE(c.has_value());
  CHECK(c->n_clusters() == 2);
  CHECK(c->sizes == std::vector<Index>{3, 2});
  CHECK(c->centers[1](0) == doctest::Approx(5.1));
  CHECK(c->partition[0] == std::vector<Index>{0, 1, 2});

  MatrixXd edge(2, 1);
  edge << 0.0, 1.0;
  CHECK_FALSE(detect_clusters(OpinionState::from_rows(edge), 1.0).has_value());

  // Connected through a chain but with a pair farther than R inside.
  MatrixXd chain(3, 1);
  chain << 0.0, 0.6, 1.2;
  CHECK_FALSE(detect_clusters(OpinionState::from_rows(chain), 1.0).has_value());
  CHECK_THROWS_AS(detect_clusters(OpinionState::from_rows(chain), 0.0), InputError);
}

TEST_CASE("equal-size clusters break ties by center") {
  MatrixXd rows(4, 1);
  rows << 3.0, 3.1, -3.0, -2.9;
  const auto c = detect_clusters(OpinionState::from_rows(rows), 1.0);
  REQUIRE(c.has_value());
  CHECK(c->centers[0](0) < c->centers[1](0));
}

TEST_CASE("clustered states stay clustered") {
  Rng rng(4);
  const auto phi = InteractionKernel::piecewise_default();
  MatrixXd rows(6, 2);
  rows << 0.0, 0.0, 0.3, 0.1, -0.2, 0.2, 4.0, 4.0, 4.4, 4.1, 3.8, 3.7;
  OpinionState x = OpinionState::from_rows(rows);
  const auto first = detect_clusters(x, 1.0);
  REQUIRE(first.has_value());
  for (int t = 0; t < 500; ++t) {
    x = step(x, phi, 0.05);
    const auto now = detect_clusters(x, 1.0);
    REQUIRE(now.has_value());
    CHECK(now->partition == first->partition);
    for (Index k = 0; k < 2; ++k) CHECK((now->centers[k] - first->centers[k]).norm() < 1e-12);
  }
}

TEST_CASE("non-physical detection compares radii t0 steps apart") {
  std::vector<VectorXd> window;
  for (int t = 0; t <= 3; ++t) {
    VectorXd x(4);
    x << -1.0 - t, 0.0, 1.0 + t, 0.0;
    window.push_back(x);
  }
  CHECK(is_nonphysical(window, 2, 3, 0.3));
  CHECK_FALSE(is_nonphysical(window, 2, 3, 10.0));
  std::reverse(window.begin(), window.end());
  CHECK_FALSE(is_nonphysical(window, 2, 3, 0.3));
  CHECK_THROWS_AS(is_nonphysical(window, 2, 4, 0.3), InputError);
  CHECK_THROWS_AS(is_nonphysical(window, 2, 0, 0.3), InputError);
}

TEST_CASE("disconnected unobserved agents") {
  const auto phi = InteractionKernel::piecewise_default();
  MatrixXd rows(4, 1);
  rows << 0.0, 0.9, 1.7, 9.0;
  const std::vector<Index> observed{0};
  // Agent 2 reaches agent 0 through agent 1; agent 3 is isolated.
  CHECK(disconnected_unobserved(OpinionState::from_rows(rows), observed, phi) == std::vector<Index>{3});
  const std::vector<Index> none;
  CHECK_THROWS_AS(disconnected_unobserved(OpinionState::from_rows(rows), none, phi), InputError);
}
