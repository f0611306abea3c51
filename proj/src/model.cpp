#include "clreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clreg/error.hpp"

namespace clreg {

double clamp_probability(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double logistic(double u) {
  const double e = std::exp(-std::fabs(u));
  const double p = u >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  return clamp_probability(p);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

int component_count(Compounding h) {
  switch (h) {
    case Compounding::Logistic:
      return 1;
    case Compounding::Asymptote:
    case Compounding::VaccineEfficacy:
      return 3;
  }
  return 0;
}

std::string to_string(Compounding h) {
  switch (h) {
    case Compounding::Logistic:
      return "logistic";
    case Compounding::Asymptote:
      return "asymptote";
    case Compounding::VaccineEfficacy:
      return "vaccine_efficacy";
  }
  return "?";
}

Compounding compounding_from_string(const std::string& name) {
  if (name == "logistic" || name == "identity") return Compounding::Logistic;
  if (name == "asymptote") return Compounding::Asymptote;
  if (name == "vaccine_efficacy" || name == "ve") return Compounding::VaccineEfficacy;
  throw DomainError("unknown compounding function '" + name + "'");
}

namespace {

void check_arguments(Compounding h, const std::vector<double>& u) {
  if (static_cast<int>(u.size()) != component_count(h))
    throw DimensionError("compounding function " + to_string(h) + " expects " +
                         std::to_string(component_count(h)) + " components");
  for (double v : u) {
    // The closed interval is accepted so that limiting cases can be evaluated.
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream msg;
      msg << "compounding argument " << v << " outside [0, 1]";
      throw DomainError(msg.str());
    }
  }
}

// H and its partials on raw (already clamped) component probabilities.
inline double h_value(Compounding h, double u1, double u2, double u3) {
  switch (h) {
    case Compounding::Logistic:
      return u1;
    case Compounding::Asymptote:
      return u3 * u1 + u2 * (1.0 - u1);
    case Compounding::VaccineEfficacy:
      return u3 * (1.0 - u2 * u1);
  }
  return 0.0;
}

inline std::array<double, 3> h_partials(Compounding h, double u1, double u2, double u3) {
  switch (h) {
    case Compounding::Logistic:
      return {1.0, 0.0, 0.0};
    case Compounding::Asymptote:
      return {u3 - u2, 1.0 - u1, u1};
    case Compounding::VaccineEfficacy:
      return {-u3 * u2, -u3 * u1, 1.0 - u2 * u1};
  }
  return {0.0, 0.0, 0.0};
}

}  // namespace

double compound_mean(Compounding h, const std::vector<double>& u) {
  check_arguments(h, u);
  if (h == Compounding::Logistic) return u[0];
  return h_value(h, u[0], u[1], u[2]);
}

std::vector<double> compound_partials(Compounding h, const std::vector<double>& u) {
  check_arguments(h, u);
  if (h == Compounding::Logistic) return {1.0};
  const auto d = h_partials(h, u[0], u[1], u[2]);
  return {d[0], d[1], d[2]};
}

void ModelSpec::validate() const {
  if (static_cast<int>(designs.size()) != component_count(h))
    throw DimensionError("model " + to_string(h) + " needs " + std::to_string(component_count(h)) +
                         " design matrices, got " + std::to_string(designs.size()));
  for (const auto& x : designs) {
    if (x.rows() != rows() || x.cols() != params())
      throw DimensionError("all component design matrices must share the same shape");
  }
  if (!param_names.empty() && static_cast<Index>(param_names.size()) != params())
    throw DimensionError("parameter name count does not match design width");
  if (biomarker) {
    const auto& b = *biomarker;
    if (b.component < 0 || b.component >= components() || b.column < 0 || b.column >= params())
      throw DimensionError("biomarker location outside the design");
    if (b.sign != 1.0 && b.sign != -1.0) throw DomainError("biomarker sign must be +1 or -1");
    if (b.reparametrize) {
      for (int k = 0; k < components(); ++k) {
        if (k != b.component && designs[k].col(b.column).cwiseAbs().maxCoeff() > 0.0)
          throw DomainError("reparametrized biomarker must appear in exactly one component");
      }
    }
  }
}

ModelSpec ModelSpec::subset(const std::vector<Index>& rows_wanted) const {
  ModelSpec out = *this;
  for (std::size_t k = 0; k < designs.size(); ++k) {
    MatrixXd x(static_cast<Index>(rows_wanted.size()), params());
    for (std::size_t r = 0; r < rows_wanted.size(); ++r) x.row(r) = designs[k].row(rows_wanted[r]);
    out.designs[k] = std::move(x);
  }
  return out;
}

VectorXd ModelSpec::biomarker_values() const {
  if (!biomarker) throw DomainError("model has no designated biomarker");
  return designs[biomarker->component].col(biomarker->column);
}

MatrixXd linear_predictors(const ModelSpec& spec, const VectorXd& theta) {
  if (theta.size() != spec.params())
    throw DimensionError("parameter vector has length " + std::to_string(theta.size()) +
                         ", model expects " + std::to_string(spec.params()));
  const Index n = spec.rows();
  MatrixXd eta(n, spec.components());
  for (int k = 0; k < spec.components(); ++k) eta.col(k) = spec.designs[k] * theta;

  if (spec.biomarker && spec.biomarker->reparametrize) {
    const auto& b = *spec.biomarker;
    const auto& x = spec.designs[b.component];
    const double slope = std::exp(theta(b.column));
    // eta_star excludes the biomarker column.
    const VectorXd eta_star = eta.col(b.component) - x.col(b.column) * theta(b.column);
    eta.col(b.component) = slope * (b.sign * x.col(b.column) - eta_star);
  }
  return eta;
}

MeanState mean_state(const ModelSpec& spec, const VectorXd& theta) {
  MeanState s;
  s.eta = linear_predictors(spec, theta);
  const Index n = spec.rows();
  const int m = spec.components();
  s.component_pi.resize(n, m);
  s.component_tau.resize(n, m);
  s.hprime.resize(n, m);
  s.pi.resize(n);
  s.tau.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < m; ++k) {
      const double u = logistic(s.eta(i, k));
      s.component_pi(i, k) = u;
      s.component_tau(i, k) = u * (1.0 - u);
    }
    const double u1 = s.component_pi(i, 0);
    const double u2 = m > 1 ? s.component_pi(i, 1) : 0.0;
    const double u3 = m > 2 ? s.component_pi(i, 2) : 0.0;
    const double p = clamp_probability(h_value(spec.h, u1, u2, u3));
    s.pi(i) = p;
    s.tau(i) = p * (1.0 - p);
    const auto d = h_partials(spec.h, u1, u2, u3);
    for (int k = 0; k < m; ++k) s.hprime(i, k) = d[k];
  }
  return s;
}

MatrixXd gradient_matrix(const ModelSpec& spec, const VectorXd& theta, const MeanState& state) {
  const Index n = spec.rows();
  if (state.pi.size() != n || theta.size() != spec.params())
    throw DimensionError("mean state does not match the model");
  MatrixXd gamma = MatrixXd::Zero(n, spec.params());
  for (int k = 0; k < spec.components(); ++k) {
    const VectorXd weight = state.hprime.col(k).cwiseProduct(state.component_tau.col(k));
    if (spec.biomarker && spec.biomarker->reparametrize && spec.biomarker->component == k) {
      const auto& b = *spec.biomarker;
      // d eta / d xi = eta; d eta / d theta_j = -exp(xi) x_j for the starred terms.
      MatrixXd jac = -std::exp(theta(b.column)) * spec.designs[k];
      jac.col(b.column) = state.eta.col(k);
      gamma.noalias() += weight.asDiagonal() * jac;
    } else {
      gamma.noalias() += weight.asDiagonal() * spec.designs[k];
    }
  }
  return gamma;
}

RankReport rank_check(const MatrixXd& gamma) {
  RankReport r;
  if (gamma.cols() == 0) return r;
  Eigen::JacobiSVD<MatrixXd> svd(gamma);
  const auto& sv = svd.singularValues();
  r.max_singular_value = sv.size() ? sv(0) : 0.0;
  r.min_singular_value = sv.size() ? sv(sv.size() - 1) : 0.0;
  r.full_rank = gamma.rows() >= gamma.cols() && r.max_singular_value > 0.0 &&
                r.min_singular_value / r.max_singular_value > 1e-10;
  return r;
}

}  // namespace clreg
