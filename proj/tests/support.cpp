#include "support.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

LogisticFit logistic_newton(const MatrixXd& x, const VectorXd& y) {
  LogisticFit fit;
  fit.beta = VectorXd::Zero(x.cols());
  MatrixXd info;
  for (int it = 0; it < 100; ++it) {
    VectorXd p(x.rows());
    for (Index i = 0; i < x.rows(); ++i) p(i) = sigmoid(x.row(i).dot(fit.beta));
    const VectorXd w = p.array() * (1.0 - p.array());
    info = x.transpose() * w.asDiagonal() * x;
    const VectorXd step = info.ldlt().solve(x.transpose() * (y - p));
    fit.beta += step;
    fit.iterations = it + 1;
    if (step.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  VectorXd p(x.rows());
  for (Index i = 0; i < x.rows(); ++i) p(i) = sigmoid(x.row(i).dot(fit.beta));
  const VectorXd w = p.array() * (1.0 - p.array());
  info = x.transpose() * w.asDiagonal() * x;
  fit.se = info.inverse().diagonal().cwiseSqrt();
  return fit;
}

MatrixXd numeric_gradient(const clreg::ModelSpec& spec, const VectorXd& theta, double step) {
  MatrixXd g(spec.rows(), theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    VectorXd up = theta, down = theta;
    up(j) += step;
    down(j) -= step;
    g.col(j) = (clreg::mean_state(spec, up).pi - clreg::mean_state(spec, down).pi) / (2.0 * step);
  }
  return g;
}

double brute_force_auc(const VectorXd& y, const VectorXd& score) {
  double concordant = 0.0;
  long cases = 0, controls = 0;
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1.0) ++cases;
    else ++controls;
  }
  for (Index i = 0; i < y.size(); ++i) {
    if (y(i) != 1.0) continue;
    for (Index j = 0; j < y.size(); ++j) {
      if (y(j) == 1.0) continue;
      if (score(i) > score(j)) concordant += 1.0;
      else if (score(i) == score(j)) concordant += 0.5;
    }
  }
  if (cases == 0 || controls == 0) throw std::invalid_argument("single class");
  return concordant / static_cast<double>(cases * controls);
}

RandomModel random_model(std::mt19937_64& rng, clreg::Compounding h, bool reparametrize, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> extra(1, 2);
  const int m = clreg::component_count(h);

  std::vector<int> covs(static_cast<std::size_t>(m));
  Index p = 0;
  for (int k = 0; k < m; ++k) {
    covs[static_cast<std::size_t>(k)] = extra(rng);
    p += 1 + covs[static_cast<std::size_t>(k)];
  }
  RandomModel out;
  out.spec.h = h;
  out.spec.designs.assign(static_cast<std::size_t>(m), MatrixXd::Zero(n, p));
  out.theta.resize(p);
  Index j = 0;
  for (int k = 0; k < m; ++k) {
    MatrixXd& x = out.spec.designs[static_cast<std::size_t>(k)];
    for (int c = 0; c < covs[static_cast<std::size_t>(k)]; ++c) {
      for (Index i = 0; i < n; ++i) x(i, j) = c == 0 ? unif(rng) : normal(rng);
      out.theta(j) = 0.8 * normal(rng);
      if (k == 0 && c == 0 && reparametrize) {
        out.spec.biomarker = clreg::Biomarker{0, j, true, unif(rng) < 0.0 ? -1.0 : 1.0};
        out.theta(j) = 0.5 * unif(rng);
      }
      ++j;
    }
    x.col(j).setOnes();
    out.theta(j) = 0.5 * normal(rng);
    ++j;
  }
  for (Index q = 0; q < p; ++q) out.spec.param_names.push_back("t" + std::to_string(q));
  out.spec.validate();
  return out;
}

void logistic_data(std::mt19937_64& rng, Index n, Index p, MatrixXd& x, VectorXd& y) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  x.resize(n, p);
  y.resize(n);
  VectorXd beta(p);
  for (Index j = 0; j < p; ++j) beta(j) = 0.7 * normal(rng);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Index j = 1; j < p; ++j) x(i, j) = normal(rng);
    y(i) = unif(rng) < sigmoid(x.row(i).dot(beta)) ? 1.0 : 0.0;
  }
}

double relative_error(const MatrixXd& value, const MatrixXd& reference) {
  const double scale = std::max(reference.cwiseAbs().maxCoeff(), 1e-300);
  return (value - reference).cwiseAbs().maxCoeff() / scale;
}

}  // namespace oracle
