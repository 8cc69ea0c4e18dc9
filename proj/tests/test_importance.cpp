#include <cmath>
#include <numbers>

#include <doctest.h>

#include "opinion_smc/ensemble.hpp"
#include "opinion_smc/errors.hpp"
#include "opinion_smc/importance.hpp"
#include "support/oracles.hpp"

using namespace opinion_smc;

namespace {

MatrixXd selection(const ObservationModel& m) {
  MatrixXd h = MatrixXd::Zero(m.observation_size(), m.state_size());
  for (Index j = 0; j < m.n_observed(); ++j)
    for (Index k = 0; k < m.dim(); ++k) h(j * m.dim() + k, m.observed()[j] * m.dim() + k) = 1.0;
  return h;
}

double dense_log_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& precision) {
  const VectorXd r = x - mean;
  const double n = static_cast<double>(x.size());
  return -0.5 * r.dot(precision * r) - 0.5 * n * std::log(2 * std::numbers::pi) +
         0.5 * std::log(precision.determinant());
}

}  // namespace

TEST_CASE("Gaussian proposal densities and draws") {
  MatrixXd p(2, 2);
  p << 4.0, 1.0, 1.0, 3.0;
  const VectorXd mean = (VectorXd(2) << 0.5, -1.0).finished();
  const GaussianProposal q(mean, p);
  const VectorXd x = (VectorXd(2) << 0.1, 0.2).finished();
  CHECK(q.log_density(x) == doctest::Approx(dense_log_density(x, mean, p)).epsilon(1e-13));
  CHECK(q.log_norm() == doctest::Approx(q.log_density(mean)).epsilon(1e-14));
  CHECK(draw_with_noise(q, VectorXd::Zero(2)).x == mean);

  Rng rng(9);
  VectorXd sum = VectorXd::Zero(2);
  MatrixXd outer = MatrixXd::Zero(2, 2);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const ProposalDraw d = sample_proposal(q, rng);
    CHECK(d.log_density == doctest::Approx(q.log_density(d.x)).epsilon(1e-12));
    sum += d.x;
    outer += (d.x - mean) * (d.x - mean).transpose();
  }
  CHECK((sum / n - mean).norm() < 0.02);
  CHECK((outer / n - p.inverse()).cwiseAbs().maxCoeff() < 0.01);

  CHECK_THROWS_AS(GaussianProposal(mean, MatrixXd::Identity(3, 3)), InputError);
  MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianProposal(mean, indefinite), NumericalError);
}

TEST_CASE("canonical form solves for the mean") {
  MatrixXd p(2, 2);
  p << 2.0, 0.5, 0.5, 1.0;
  const VectorXd anchor = (VectorXd(2) << 1.0, 2.0).finished();
  const VectorXd linear = (VectorXd(2) << 0.3, -0.7).finished();
  const auto q = GaussianProposal::from_canonical(anchor, p, linear);
  CHECK((q.mean() - (anchor + p.inverse() * linear)).norm() < 1e-14);
}

TEST_CASE("one-step MAP point matches a numeric minimizer") {
  Rng rng(10);
  for (int k = 0; k < 20; ++k) {
    const auto m = ObservationModel::first_agents(5, 2, 1 + k % 5, 0.003 + 0.01 * (k % 3), 0.02);
    const VectorXd f = standard_normal(10, rng);
    const VectorXd z = observe(f, m) + 0.1 * standard_normal(m.observation_size(), rng);
    const VectorXd ours = implicit_map_from_forecast(f, z, m);
    const VectorXd ref = oracle::minimize_one_step(f, z, 2, m.sigma_xi(), m.sigma_eps());
    CHECK((ours - ref).cwiseAbs().maxCoeff() < 1e-10);
    // The nudging gain weighs the innovation by the state-noise share.
    const double lambda = nudging_gain(m);
    CHECK(lambda == doctest::Approx(0.02 * 0.02 / (0.02 * 0.02 + m.sigma_xi() * m.sigma_xi())));
    CHECK((observe(ours, m) - (observe(f, m) + lambda * (z - observe(f, m)))).norm() < 1e-12);
  }
}

TEST_CASE("implicit density is the one-step posterior") {
  Rng rng(11);
  const auto phi = InteractionKernel::piecewise_default();
  const auto m = ObservationModel(4, 2, {1, 3}, 0.05, 0.1);
  const OpinionState prev(standard_normal(8, rng), 2);
  const VectorXd f = step(prev.positions(), 2, phi, 0.05);
  const VectorXd z = observe(f, m) + 0.05 * standard_normal(4, rng);
  const auto q = implicit_density(prev, z, m, phi, 0.05);
  const VectorXd diag = q.precision().diagonal();
  CHECK(diag(2) == doctest::Approx(1 / 0.0025 + 1 / 0.01));
  CHECK(diag(0) == doctest::Approx(1 / 0.01));
  CHECK(q.precision().isDiagonal());
  double first = 0.0;
  for (int k = 0; k < 30; ++k) {
    const VectorXd x = q.mean() + standard_normal(8, rng);
    const double gap = q.log_density(x) - log_lik_obs(z, x, m) - log_trans_from_forecast(x, f, m);
    if (k == 0) first = gap;
    CHECK(gap == doctest::Approx(first).epsilon(1e-12));
  }
}

TEST_CASE("Jacobian variants") {
  Rng rng(12);
  const auto phi = InteractionKernel::piecewise_default();
  const auto m = ObservationModel(5, 2, {0, 3}, 0.01, 0.01);
  const VectorXd x = (2.0 * VectorXd::NullaryExpr(10, [&] { return uniform01(rng); }).array() - 1.0).matrix();
  const MatrixXd full = jacobian_Hg(x, phi, 0.05, m, JacobianVariant::kFull);
  const MatrixXd paper = jacobian_Hg(x, phi, 0.05, m, JacobianVariant::kPaper);
  CHECK(full.rows() == 10);
  CHECK(full.cols() == 4);
  const MatrixXd fd = oracle::central_difference(
      [&](const VectorXd& v) { return VectorXd(observe(step(v, 2, phi, 0.05), m)); }, x, 1e-6);
  CHECK((full - fd.transpose()).cwiseAbs().maxCoeff() < 1e-7);
  MatrixXd identity_part = MatrixXd::Zero(10, 4);
  identity_part.block(0, 0, 2, 2).setIdentity();
  identity_part.block(6, 2, 2, 2).setIdentity();
  CHECK((full - identity_part - 0.05 * paper).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(parse_jacobian_variant(to_string(JacobianVariant::kPaper)) == JacobianVariant::kPaper);
  CHECK_THROWS_AS(parse_jacobian_variant("exact"), InputError);
}

TEST_CASE("two-observation proposal matches a dense assembly") {
  Rng rng(13);
  const auto phi = InteractionKernel::piecewise_default();
  const auto m = ObservationModel(4, 2, {0, 2}, 0.02, 0.05);
  const MatrixXd h = selection(m);
  const VectorXd f = 0.6 * standard_normal(8, rng);
  const VectorXd zt = observe(f, m) + 0.02 * standard_normal(4, rng);
  const VectorXd zn = observe(step(f, 2, phi, 0.05), m) + 0.02 * standard_normal(4, rng);
  for (Lookahead la : {Lookahead::kPredictive, Lookahead::kObservation}) {
    const double vl = la == Lookahead::kPredictive ? 0.02 * 0.02 + 0.05 * 0.05 : 0.02 * 0.02;
    CHECK(lookahead_sigma(m, la) == doctest::Approx(std::sqrt(vl)));
    const VectorXd xs = implicit_map_from_forecast(f, zt, m);
    const MatrixXd j = jacobian_Hg(xs, phi, 0.05, m);
    const VectorXd hg = observe(step(xs, 2, phi, 0.05), m);
    const MatrixXd a = j * j.transpose() / vl + MatrixXd::Identity(8, 8) / 0.0025 + h.transpose() * h / 0.0004;
    const VectorXd b = j * (zn - hg) / vl + (f - xs) / 0.0025 + h.transpose() * (zt - h * xs) / 0.0004;
    const auto q = ais_quadratic_from_forecast(f, zt, zn, m, phi, 0.05, JacobianVariant::kFull, la);
    CHECK((q.precision() - a).cwiseAbs().maxCoeff() < 1e-8 * a.cwiseAbs().maxCoeff());
    CHECK((q.mean() - (xs + a.ldlt().solve(b))).norm() < 1e-10);
  }
  CHECK(parse_lookahead("observation") == Lookahead::kObservation);
  CHECK_THROWS_AS(parse_lookahead("none"), InputError);
}

TEST_CASE("auxiliary proposal falls back to the one-step density at the horizon") {
  Rng rng(14);
  const auto phi = InteractionKernel::piecewise_default();
  const auto m = ObservationModel::first_agents(4, 2, 2, 0.02, 0.05);
  const VectorXd f = standard_normal(8, rng);
  const VectorXd zt = observe(f, m);
  const auto last = auxiliary_proposal(f, zt, nullptr, m, phi, 0.05);
  const auto one = implicit_density_from_forecast(f, zt, m);
  CHECK(last.mean() == one.mean());
  CHECK(last.precision() == one.precision());
}

TEST_CASE("incremental weight is the sum of its factors") {
  Rng rng(15);
  const auto phi = InteractionKernel::piecewise_default();
  const auto m = ObservationModel::first_agents(4, 2, 2, 0.02, 0.05);
  const OpinionState prev(0.5 * standard_normal(8, rng), 2);
  const VectorXd f = step(prev.positions(), 2, phi, 0.05);
  const VectorXd x = f + 0.05 * standard_normal(8, rng);
  const VectorXd zt = observe(x, m) + 0.02 * standard_normal(4, rng);
  const VectorXd zn = observe(step(x, 2, phi, 0.05), m) + 0.02 * standard_normal(4, rng);
  const double logq = -3.0;
  const double sl = lookahead_sigma(m, Lookahead::kPredictive);
  const double look = log_gaussian_isotropic(zn - observe(step(x, 2, phi, 0.05), m), sl);
  const double divide = log_gaussian_isotropic(zt - observe(f, m), sl);
  const double base = log_trans_from_forecast(x, f, m) + log_lik_obs(zt, x, m) - logq;
  CHECK(incremental_log_weight(f, x, zt, nullptr, false, logq, m, phi, 0.05) == doctest::Approx(base));
  CHECK(incremental_log_weight(f, x, zt, &zn, false, logq, m, phi, 0.05) == doctest::Approx(base + look));
  CHECK(incremental_log_weight(f, x, zt, &zn, true, logq, m, phi, 0.05) == doctest::Approx(base + look - divide));
  CHECK(ais_incremental_log_weight(prev, x, zt, zn, logq, m, phi, 0.05) ==
        doctest::Approx(base + look - divide));
}

TEST_CASE("linear dynamics give constant two-observation weights") {
  Rng rng(16);
  const auto linear = InteractionKernel::global_constant(1.0);
  const auto m = ObservationModel::first_agents(5, 2, 2, 0.1, 0.1);
  const VectorXd f = step(standard_normal(10, rng), 2, linear, 0.05);
  const VectorXd zt = observe(f, m) + 0.1 * standard_normal(4, rng);
  const VectorXd zn = observe(step(f, 2, linear, 0.05), m) + 0.1 * standard_normal(4, rng);
  for (Lookahead la : {Lookahead::kPredictive, Lookahead::kObservation}) {
    const auto q = ais_quadratic_from_forecast(f, zt, zn, m, linear, 0.05, JacobianVariant::kFull, la);
    VectorXd lw(100);
    for (Index i = 0; i < 100; ++i) {
      const ProposalDraw d = sample_proposal(q, rng);
      lw(i) = incremental_log_weight(f, d.x, zt, &zn, true, d.log_density, m, linear, 0.05, la);
    }
    CHECK(lw.maxCoeff() - lw.minCoeff() < 1e-8);
    CHECK(ess(lw) == doctest::Approx(100.0).epsilon(1e-12));
  }
}

TEST_CASE("proposals need positive filter noise") {
  const auto m = ObservationModel::first_agents(3, 1, 1, 0.0, 0.1);
  const VectorXd f = VectorXd::Zero(3);
  CHECK_THROWS(implicit_density_from_forecast(f, VectorXd::Zero(1), m));
}
