#include <doctest.h>

#include <cmath>
#include <random>

#include "clreg/error.hpp"
#include "clreg/model.hpp"
#include "clreg/rng.hpp"
#include "support.hpp"

using namespace clreg;

TEST_CASE("philox known answer") {
  const auto out = Philox4x32::generate({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
}

TEST_CASE("philox streams are reproducible and distinct") {
  Philox4x32 a(7, 3), b(7, 3), c(7, 4);
  for (int i = 0; i < 10; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  Philox4x32 d(7, 3);
  CHECK(d.next_u32() != c.next_u32());
  for (int i = 0; i < 1000; ++i) CHECK(d.below(6) < 6u);
}

TEST_CASE("compound means") {
  CHECK(compound_mean(Compounding::Logistic, {0.3}) == doctest::Approx(0.3));
  CHECK(compound_mean(Compounding::Asymptote, {0.25, 0.2, 0.8}) == doctest::Approx(0.8 * 0.25 + 0.2 * 0.75));
  CHECK(compound_mean(Compounding::VaccineEfficacy, {0.5, 0.6, 0.4}) == doctest::Approx(0.4 * (1 - 0.3)));
  CHECK_THROWS_AS(compound_mean(Compounding::Asymptote, {0.5, 0.5}), DimensionError);
  CHECK_THROWS_AS(compound_mean(Compounding::Asymptote, {1.5, 0.5, 0.5}), DomainError);
}

TEST_CASE("compound partials match finite differences") {
  for (Compounding h : {Compounding::Asymptote, Compounding::VaccineEfficacy}) {
    const std::vector<double> u{0.3, 0.45, 0.7};
    const auto d = compound_partials(h, u);
    for (std::size_t k = 0; k < 3; ++k) {
      auto up = u, down = u;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      CHECK(d[k] == doctest::Approx((compound_mean(h, up) - compound_mean(h, down)) / 2e-6).epsilon(1e-8));
    }
  }
}

TEST_CASE("logistic saturates at the probability clamp") {
  CHECK(logistic(0.0) == doctest::Approx(0.5));
  CHECK(logistic(1000.0) == doctest::Approx(1.0 - kProbFloor));
  CHECK(logistic(-1000.0) == doctest::Approx(kProbFloor));
  CHECK(logit(logistic(1.25)) == doctest::Approx(1.25));
  CHECK(compounding_from_string(to_string(Compounding::VaccineEfficacy)) == Compounding::VaccineEfficacy);
  CHECK_THROWS_AS(compounding_from_string("probit"), DomainError);
}

TEST_CASE("gradient matrix matches finite differences") {
  std::mt19937_64 rng(5);
  for (int draw = 0; draw < 12; ++draw) {
    const Compounding h = draw % 2 ? Compounding::Asymptote : Compounding::VaccineEfficacy;
    const auto m = oracle::random_model(rng, h, draw % 3 == 0, 25);
    const MatrixXd g = gradient_matrix(m.spec, m.theta, mean_state(m.spec, m.theta));
    const MatrixXd fd = oracle::numeric_gradient(m.spec, m.theta);
    CHECK((g - fd).norm() / fd.norm() < 1e-6);
  }
}

TEST_CASE("reversed biomarker mirrors the predictor") {
  std::mt19937_64 rng(8);
  auto m = oracle::random_model(rng, Compounding::Asymptote, true, 10);
  const Biomarker b = *m.spec.biomarker;
  const MatrixXd eta = linear_predictors(m.spec, m.theta);
  ModelSpec flipped = m.spec;
  flipped.biomarker->sign = -b.sign;
  flipped.designs[0].col(b.column) *= -1.0;
  CHECK((linear_predictors(flipped, m.theta) - eta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("model validation and subsets") {
  std::mt19937_64 rng(9);
  auto m = oracle::random_model(rng, Compounding::Asymptote, false, 8);
  const ModelSpec sub = m.spec.subset({5, 1});
  CHECK(sub.rows() == 2);
  CHECK(sub.designs[1].row(1) == m.spec.designs[1].row(1));

  ModelSpec bad = m.spec;
  bad.designs.pop_back();
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = m.spec;
  bad.param_names.pop_back();
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = m.spec;
  bad.biomarker = Biomarker{0, 0, true, 2.0};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  CHECK_THROWS_AS(linear_predictors(m.spec, VectorXd::Zero(1)), DimensionError);
}

TEST_CASE("rank check flags collinear columns") {
  MatrixXd g(4, 2);
  g << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK_FALSE(rank_check(g).full_rank);
  g(0, 1) = 0.0;
  CHECK(rank_check(g).full_rank);
}
