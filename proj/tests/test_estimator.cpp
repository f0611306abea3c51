#include <doctest.h>

#include <cmath>
#include <random>

#include "clreg/error.hpp"
#include "clreg/estimator.hpp"
#include "clreg/rng.hpp"
#include "clreg/simulation.hpp"
#include "clreg/stats.hpp"
#include "support.hpp"

using namespace clreg;

namespace {

struct LogisticProblem {
  ModelSpec spec;
  VectorXd y;
};

LogisticProblem logistic_problem(std::uint64_t seed, Index n = 120) {
  std::mt19937_64 rng(seed);
  LogisticProblem p;
  MatrixXd x;
  oracle::logistic_data(rng, n, 3, x, p.y);
  p.spec.h = Compounding::Logistic;
  p.spec.designs = {x};
  p.spec.param_names = {"b0", "b1", "b2"};
  return p;
}

FitOptions with_lambda(double lambda) {
  FitOptions o;
  o.lambda = lambda;
  return o;
}

}  // namespace

TEST_CASE("logistic fit matches an independent Newton-Raphson") {
  const LogisticProblem p = logistic_problem(11);
  const oracle::LogisticFit ref = oracle::logistic_newton(p.spec.designs[0], p.y);
  const FitResult fit = solve(p.spec, BinaryData{p.y, {}}, FitOptions{}, VectorXd::Zero(3));
  REQUIRE(fit.converged);
  CHECK(oracle::relative_error(fit.theta, ref.beta) < 1e-8);
  CHECK(oracle::relative_error(fit.covariance.diagonal().cwiseSqrt(), ref.se) < 1e-8);
  REQUIRE(fit.wald.size() == 3);
  CHECK(fit.wald[1].z == doctest::Approx(fit.wald[1].estimate / fit.wald[1].se));
  CHECK(fit.wald[1].p_value == doctest::Approx(stats::two_sided_p(fit.wald[1].z)));
}

TEST_CASE("ridge estimating function subtracts twice lambda theta") {
  const LogisticProblem p = logistic_problem(12);
  const VectorXd theta = (VectorXd(3) << 0.3, -0.2, 0.5).finished();
  const auto ind = CorrelationStructure::independent();
  const VectorXd g0 = estimating_fn(p.spec, p.y, theta, ind, 0.0);
  const VectorXd g1 = estimating_fn(p.spec, p.y, theta, ind, 0.4);
  CHECK((g1 - (g0 - 0.8 * theta)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ridge fit solves the penalized equation and shrinks monotonically") {
  const LogisticProblem p = logistic_problem(13);
  double previous = INFINITY;
  for (double lambda : {0.0, 0.5, 2.0, 8.0, 32.0}) {
    const FitResult fit = solve(p.spec, BinaryData{p.y, {}}, with_lambda(lambda), VectorXd::Zero(3));
    REQUIRE(fit.converged);
    const VectorXd g = estimating_fn(p.spec, p.y, fit.theta, CorrelationStructure::independent(), lambda);
    CHECK(g.cwiseAbs().maxCoeff() <= fit.grad_threshold);
    CHECK(fit.theta.norm() <= previous + 1e-12);
    previous = fit.theta.norm();
  }
}

TEST_CASE("sandwich collapses to the inverse information when W equals V") {
  const LogisticProblem p = logistic_problem(14, 40);
  const VectorXd theta = (VectorXd(3) << 0.2, 0.4, -0.3).finished();
  const auto v = CorrelationStructure::exchangeable(consecutive_groups(40, 4), 0.25);
  const OmegaSet om = omegas(p.spec, theta, v, v);
  CHECK(oracle::relative_error(sandwich_covariance(om, 0.0), om.omega_v.inverse()) < 1e-10);
  CHECK(oracle::relative_error(om.omega_wv, om.omega_w) < 1e-10);
}

TEST_CASE("sandwich vanishes as lambda grows") {
  const LogisticProblem p = logistic_problem(15, 40);
  const VectorXd theta = VectorXd::Constant(3, 0.1);
  const auto ind = CorrelationStructure::independent();
  const auto v = CorrelationStructure::exchangeable(consecutive_groups(40, 5), 0.3);
  double previous = INFINITY;
  for (double lambda : {1.0, 1e2, 1e4, 1e6}) {
    const double size = covariance(p.spec, theta, ind, v, lambda).norm();
    CHECK(size < previous);
    previous = size;
  }
  CHECK(previous < 1e-9);
}

TEST_CASE("singular bread is reported") {
  OmegaSet om{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
  CHECK_THROWS_AS(sandwich_covariance(om, 0.0), RankDeficiencyError);
}

TEST_CASE("fit options are validated") {
  FitOptions o;
  o.lambda = -1.0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = FitOptions{};
  o.quasi_lik = true;
  CHECK_THROWS_AS(o.validate(), ConfigError);
  o = FitOptions{};
  o.max_iter = 0;
  CHECK_THROWS_AS(o.validate(), ConfigError);
}

TEST_CASE("non-convergence is reported through the status") {
  const LogisticProblem p = logistic_problem(16);
  FitOptions o;
  o.max_iter = 1;
  const FitResult fit = solve(p.spec, BinaryData{p.y, {}}, o, VectorXd::Zero(3));
  CHECK_FALSE(fit.converged);
  CHECK(fit.status == FitStatus::MaxIterations);
  CHECK(fit.covariance.size() == 0);
}

TEST_CASE("band critical values") {
  CHECK(band_critical_value(0.95, 3, false) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(band_critical_value(0.95, 3, true) == doctest::Approx(std::sqrt(7.814728)).epsilon(1e-6));
  CHECK_THROWS_AS(band_critical_value(1.5, 3, false), DomainError);
}

TEST_CASE("asymptote model recovers its parameters on a large correlated sample") {
  StudyConfig c = default_study();
  const Index n = 4000;
  Philox4x32 rng(42, 0);
  VectorXd z(n), x(n);
  for (Index i = 0; i < n; ++i) {
    z(i) = 2.0 * rng.uniform() - 1.0;
    x(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  const ModelSpec spec = two_covariate_design(c.h, z, x);
  const GroupIndex groups = consecutive_groups(n, 5);
  const VectorXd pi = mean_state(spec, c.theta_true).pi;
  const VectorXd y = simulate_exchangeable_binary(pi, groups, 0.1, rng);

  FitOptions o = c.options;
  o.lambda = 0.0;
  const FitResult fit = solve(spec, BinaryData{y, groups}, o, c.theta_true);
  REQUIRE(fit.converged);
  REQUIRE(fit.rho);
  CHECK(std::fabs(fit.rho->clipped - 0.1) < 0.05);
  for (Index j = 0; j < 6; ++j) {
    const double z_score = (fit.wald[j].estimate - c.theta_true(j)) / fit.wald[j].se;
    CHECK(std::fabs(z_score) < 4.0);
  }
}

TEST_CASE("confidence band brackets the fitted curve") {
  const LogisticProblem p = logistic_problem(17);
  const FitResult fit = solve(p.spec, BinaryData{p.y, {}}, FitOptions{}, VectorXd::Zero(3));
  REQUIRE(fit.converged);
  const ModelSpec at = p.spec.subset({0, 1, 2, 3});
  const Band marginal = confidence_band(fit, at, 0.95, false);
  const Band simultaneous = confidence_band(fit, at, 0.95, true);
  for (Index i = 0; i < 4; ++i) {
    CHECK(marginal.lower(i) <= marginal.pi_hat(i));
    CHECK(marginal.pi_hat(i) <= marginal.upper(i));
    CHECK(simultaneous.lower(i) <= marginal.lower(i));
    CHECK(simultaneous.upper(i) >= marginal.upper(i));
    CHECK(simultaneous.lower(i) >= 0.0);
    CHECK(simultaneous.upper(i) <= 1.0);
  }
}
