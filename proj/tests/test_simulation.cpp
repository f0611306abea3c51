#include <doctest.h>

#include <boost/math/constants/constants.hpp>
#include <cmath>

#include "clreg/bvn.hpp"
#include "clreg/error.hpp"
#include "clreg/simulation.hpp"
#include "clreg/stats.hpp"

using namespace clreg;

namespace {

// P(X <= h, Y <= k) as the integral of phi(x) Phi((k - r x) / sqrt(1 - r^2)) by Simpson's rule.
double bvn_by_quadrature(double h, double k, double r) {
  const double a = -12.0;
  const int m = 20000;
  const double step = (h - a) / m;
  auto f = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * boost::math::constants::pi<double>()) *
           stats::normal_cdf((k - r * x) / std::sqrt(1.0 - r * r));
  };
  double sum = f(a) + f(h);
  for (int i = 1; i < m; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * step);
  return sum * step / 3.0;
}

}  // namespace

TEST_CASE("bivariate normal at the origin") {
  CHECK(bivariate_normal_cdf(0.0, 0.0, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(bivariate_normal_cdf(0.0, 0.0, 0.0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(bivariate_normal_cdf(0.7, -0.2, 1.0) == doctest::Approx(stats::normal_cdf(-0.2)).epsilon(1e-12));
  CHECK_THROWS_AS(bivariate_normal_cdf(0.0, 0.0, 1.5), DomainError);
}

TEST_CASE("bivariate normal matches numerical integration") {
  for (double r : {-0.9, -0.4, 0.1, 0.6, 0.95})
    for (double h : {-1.5, 0.0, 0.8})
      for (double k : {-0.5, 1.2}) CHECK(bivariate_normal_cdf(h, k, r) == doctest::Approx(bvn_by_quadrature(h, k, r)).epsilon(1e-9));
}

TEST_CASE("latent correlation inverts the binary correlation") {
  CHECK(binary_correlation(0.3, 0.6, 0.0) == doctest::Approx(0.0));
  CHECK(binary_correlation(0.5, 0.5, 1.0) == doctest::Approx(1.0));
  const std::vector<double> pi{0.2, 0.5, 0.8};
  const double r = latent_correlation(pi, 0.2);
  double avg = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) avg += binary_correlation(pi[i], pi[j], r) / 3.0;
  CHECK(avg == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(latent_correlation(pi, 0.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(latent_correlation({0.05, 0.95}, 0.9), DomainError);
}

TEST_CASE("sampler reproduces marginals and correlation") {
  const VectorXd pi = (VectorXd(6) << 0.3, 0.4, 0.6, 0.3, 0.5, 0.7).finished();
  const GroupIndex groups{{0, 1, 2}, {3, 4, 5}};
  const ExchangeableBinarySampler s(pi, groups, 0.2);
  Philox4x32 rng(3, 9);
  const long draws = 40000;
  VectorXd mean = VectorXd::Zero(6);
  double c01 = 0.0;
  for (long t = 0; t < draws; ++t) {
    const VectorXd y = s.draw(rng);
    mean += y;
    c01 += y(3) * y(5);
  }
  mean /= draws;
  for (Index i = 0; i < 6; ++i) CHECK(std::fabs(mean(i) - pi(i)) < 4.0 * std::sqrt(pi(i) * (1 - pi(i)) / draws));
  const double corr = (c01 / draws - mean(3) * mean(5)) / std::sqrt(mean(3) * (1 - mean(3)) * mean(5) * (1 - mean(5)));
  CHECK(corr == doctest::Approx(binary_correlation(pi(3), pi(5), s.latent_rho()[1])).epsilon(0.2));
}

TEST_CASE("sampler handles negative correlation and singletons") {
  const VectorXd pi = VectorXd::Constant(5, 0.5);
  const ExchangeableBinarySampler s(pi, {{0, 1, 2}, {3}, {4}}, -0.2);
  Philox4x32 rng(1, 1);
  const VectorXd y = s.draw(rng);
  CHECK(y.size() == 5);
  CHECK(((y.array() == 0.0) || (y.array() == 1.0)).all());
  CHECK_THROWS_AS(ExchangeableBinarySampler(pi, {{0, 1, 2, 3, 4}}, -0.5), DomainError);
}

TEST_CASE("consecutive groups") {
  const GroupIndex g = consecutive_groups(7, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[2] == std::vector<Index>{6});
}

TEST_CASE("default study design") {
  const StudyConfig c = default_study();
  CHECK(c.n == 200);
  CHECK(c.theta_true(2) == doctest::Approx(std::log(1.0 / 3.0)));
  CHECK(c.theta_true(5) == -2.0);
  const StudyDataset a = study_dataset(c, 4), b = study_dataset(c, 4), other = study_dataset(c, 5);
  CHECK(a.y == b.y);
  CHECK(a.z == other.z);
  CHECK(a.y != other.y);
  CHECK(((a.x.array() == 0.0) || (a.x.array() == 1.0)).all());
  CHECK(a.z.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("small study is thread-count invariant") {
  StudyConfig c = default_study();
  c.n_sim = 12;
  c.lambdas = {0.1};
  c.threads = 1;
  const StudySummary one = run_study(c);
  c.threads = 3;
  const StudySummary three = run_study(c);
  REQUIRE(one.replications.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(one.replications[i].estimate == three.replications[i].estimate);
    CHECK(one.replications[i].se == three.replications[i].se);
  }
  const LambdaSummary& b = one.blocks.front();
  CHECK(b.params.size() == 6);
  CHECK(b.failure_rate == doctest::Approx(1.0 - b.converged / 12.0));
  CHECK(b.power == doctest::Approx(power_estimate(one, 0, 5, 0.05)));
}

TEST_CASE("study configuration is validated") {
  StudyConfig c = default_study();
  c.rho = 0.99;
  c.n_sim = 1;
  c.lambdas = {0.1};
  CHECK_THROWS_AS(run_study(c), DomainError);
  c = default_study();
  c.n_sim = 0;
  CHECK_THROWS(c.validate());
}
