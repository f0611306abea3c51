#include <doctest.h>

#include <algorithm>
#include <random>

#include "clreg/error.hpp"
#include "clreg/selection.hpp"
#include "clreg/simulation.hpp"
#include "support.hpp"

using namespace clreg;

TEST_CASE("folds are balanced and reproducible") {
  const std::vector<int> a = kfold_split(23, 5, {}, 9);
  CHECK(a == kfold_split(23, 5, {}, 9));
  CHECK(a != kfold_split(23, 5, {}, 10));
  std::vector<int> count(5, 0);
  for (int f : a) ++count[static_cast<std::size_t>(f)];
  const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
  CHECK(*hi - *lo <= 1);
  CHECK_THROWS_AS(kfold_split(4, 5, {}, 1), ConfigError);
  CHECK_THROWS_AS(kfold_split(4, 1, {}, 1), ConfigError);
}

TEST_CASE("grouped folds keep groups together") {
  const GroupIndex groups = consecutive_groups(33, 4);
  const std::vector<int> fold = kfold_split(33, 3, groups, 2);
  std::vector<int> per_fold(3, 0);
  for (const auto& g : groups) {
    for (Index i : g) CHECK(fold[i] == fold[g.front()]);
    ++per_fold[static_cast<std::size_t>(fold[g.front()])];
  }
  CHECK(*std::max_element(per_fold.begin(), per_fold.end()) - *std::min_element(per_fold.begin(), per_fold.end()) <=
        1);
}

TEST_CASE("auc equals the pairwise count with ties") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 5);
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd y(30), s(30);
    for (Index i = 0; i < 30; ++i) {
      y(i) = i % 3 == 0 ? 1.0 : 0.0;
      s(i) = level(rng);
    }
    CHECK(gof_auc(y, s) == oracle::brute_force_auc(y, s));
  }
  const VectorXd y = (VectorXd(4) << 0, 0, 1, 1).finished();
  CHECK(gof_auc(y, (VectorXd(4) << 0.1, 0.2, 0.3, 0.4).finished()) == 1.0);
  CHECK(gof_auc(y, VectorXd::Constant(4, 0.5)) == 0.5);
  CHECK_THROWS_AS(gof_auc(VectorXd::Ones(4), VectorXd::Zero(4)), DataError);
}

TEST_CASE("deviance and weighted squared error") {
  const VectorXd y = (VectorXd(2) << 1, 0).finished();
  const VectorXd p = (VectorXd(2) << 0.8, 0.25).finished();
  CHECK(gof_deviance(y, p) == doctest::Approx(std::log(0.8) + std::log(0.75)));
  const VectorXd tau = p.array() * (1 - p.array());
  const WorkingCovariance v(tau, CorrelationStructure::independent());
  CHECK(gof_sse(y, p, v) == doctest::Approx(0.04 / tau(0) + 0.0625 / tau(1)));
  CHECK(larger_is_better(GofScore::AUC));
  CHECK_FALSE(larger_is_better(GofScore::SSE));
  CHECK(gof_score_from_string("auc") == GofScore::AUC);
  CHECK_THROWS_AS(gof_score_from_string("brier"), ConfigError);
}

TEST_CASE("cross-validation sorts and de-duplicates the grid") {
  std::mt19937_64 rng(21);
  MatrixXd x;
  VectorXd y;
  oracle::logistic_data(rng, 80, 2, x, y);
  ModelSpec spec;
  spec.designs = {x};
  spec.param_names = {"b0", "b1"};
  CvPlan plan;
  plan.folds = 4;
  plan.lambda_grid = {1.0, 0.0, 1.0, 0.25};
  plan.score = GofScore::AUC;
  const CvResult cv = cv_select(spec, BinaryData{y, {}}, FitOptions{}, plan);
  REQUIRE(cv.table.size() == 3);
  CHECK(cv.table[0].lambda == 0.0);
  CHECK(cv.table[2].lambda == 1.0);
  for (const CvRow& row : cv.table) {
    CHECK_FALSE(row.failed);
    CHECK(row.yhat_star.allFinite());
    CHECK(row.score == gof_auc(y, row.yhat_star));
  }
  for (const CvRow& row : cv.table) {
    CHECK(row.score <= cv.table[cv.selected].score);
  }
  CHECK(cv.lambda_gof == cv.table[cv.selected].lambda);

  plan.lambda_grid = {-1.0};
  CHECK_THROWS_AS(cv_select(spec, BinaryData{y, {}}, FitOptions{}, plan), ConfigError);
  plan.lambda_grid = {0.0};
  CHECK_THROWS_AS(cv_select(spec, BinaryData{VectorXd::Zero(80), {}}, FitOptions{}, plan), DataError);
}

TEST_CASE("cross-validation fails when no lambda converges") {
  std::mt19937_64 rng(22);
  MatrixXd x;
  VectorXd y;
  oracle::logistic_data(rng, 40, 2, x, y);
  ModelSpec spec;
  spec.designs = {x};
  spec.param_names = {"b0", "b1"};
  FitOptions o;
  o.max_iter = 1;
  CvPlan plan;
  plan.folds = 2;
  CHECK_THROWS_AS(cv_select(spec, BinaryData{y, {}}, o, plan), ConvergenceError);
}
