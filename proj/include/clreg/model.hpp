#pragma once

// Compound logistic mean model: pi_i = H(phi(eta_i1), ..., phi(eta_im)).

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace clreg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Probabilities are kept inside [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-10;

double clamp_probability(double p);

/// Stable logistic function, saturating at the probability clamp bounds.
double logistic(double u);

double logit(double p);

enum class Compounding {
  Logistic,         // m = 1, H(u) = u (ordinary logistic regression)
  Asymptote,        // H(u1,u2,u3) = u3*u1 + u2*(1-u1)
  VaccineEfficacy,  // H(u1,u2,u3) = u3*(1 - u2*u1)
};

int component_count(Compounding h);
std::string to_string(Compounding h);
Compounding compounding_from_string(const std::string& name);

/// H(u). Throws DomainError if a u_k lies outside (0,1) or the size is wrong.
double compound_mean(Compounding h, const std::vector<double>& u);

/// (dH/du_1, ..., dH/du_m).
std::vector<double> compound_partials(Compounding h, const std::vector<double>& u);

/// Designated biomarker column. When `reparametrize` is set the component's
/// linear predictor becomes
///
///   eta = exp(xi) * (sign * b - eta_star),   eta_star = sum_{j != column} theta_j x_j
///
/// where xi = theta[column] and b is the raw biomarker stored in that column
/// of the component design. `sign` is -1 when the biomarker was reversed to
/// force a positive gradient.
struct Biomarker {
  int component = 0;
  Index column = 0;
  bool reparametrize = false;
  double sign = 1.0;
};

/// Per-component n x p design matrices over a shared parameter vector.
/// A parameter absent from a component has an all-zero column there.
struct ModelSpec {
  Compounding h = Compounding::Logistic;
  std::vector<MatrixXd> designs;
  std::optional<Biomarker> biomarker;
  std::vector<std::string> param_names;

  Index rows() const { return designs.empty() ? 0 : designs.front().rows(); }
  Index params() const { return designs.empty() ? 0 : designs.front().cols(); }
  int components() const { return static_cast<int>(designs.size()); }

  /// Throws DimensionError / DomainError on inconsistent structure.
  void validate() const;

  /// Same model restricted to the given rows (in the given order).
  ModelSpec subset(const std::vector<Index>& rows) const;

  /// Raw biomarker values (unsigned), if a biomarker is designated.
  VectorXd biomarker_values() const;
};

/// n x m matrix of linear predictors.
MatrixXd linear_predictors(const ModelSpec& spec, const VectorXd& theta);

struct MeanState {
  VectorXd pi;              // clamped means
  VectorXd tau;             // pi (1 - pi)
  MatrixXd eta;             // n x m linear predictors
  MatrixXd component_pi;    // n x m, clamped
  MatrixXd component_tau;   // n x m
  MatrixXd hprime;          // n x m partials of H at component_pi
};

MeanState mean_state(const ModelSpec& spec, const VectorXd& theta);

/// Gamma = sum_k D(H'_k) D(tau_k) d eta_k / d theta, the n x p Jacobian of pi.
MatrixXd gradient_matrix(const ModelSpec& spec, const VectorXd& theta, const MeanState& state);

struct RankReport {
  bool full_rank = false;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
};

/// Full rank when sigma_min / sigma_max > 1e-10.
RankReport rank_check(const MatrixXd& gamma);

}  // namespace clreg
