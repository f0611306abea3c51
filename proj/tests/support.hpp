#pragma once

// Independent reference implementations used as test oracles.

#include <Eigen/Dense>
#include <random>

#include "clreg/model.hpp"

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LogisticFit {
  VectorXd beta;
  VectorXd se;
  int iterations = 0;
};

/// Newton-Raphson for ordinary logistic regression with its own sigmoid.
LogisticFit logistic_newton(const MatrixXd& x, const VectorXd& y);

/// Central differences of the model mean with respect to theta.
MatrixXd numeric_gradient(const clreg::ModelSpec& spec, const VectorXd& theta, double step = 1e-6);

/// Pairwise concordance: 1 per ordered case/control pair, 1/2 per tie.
double brute_force_auc(const VectorXd& y, const VectorXd& score);

struct RandomModel {
  clreg::ModelSpec spec;
  VectorXd theta;
};

/// A three-component model with intercepts and one or two covariates per
/// component; the biomarker sits in component 1 and is reparametrized when
/// `reparametrize` is set (with a random sign).
RandomModel random_model(std::mt19937_64& rng, clreg::Compounding h, bool reparametrize, Index n);

/// Data from a known logistic model, x with an intercept column.
void logistic_data(std::mt19937_64& rng, Index n, Index p, MatrixXd& x, VectorXd& y);

/// Max entrywise difference relative to the largest entry of `reference`.
double relative_error(const MatrixXd& value, const MatrixXd& reference);

}  // namespace oracle
