#pragma once

// Estimating-equation fitting for compound logistic models:
//   G_lambda(theta) = Gamma^T W^{-1} (y - pi) - 2 lambda theta = 0,
// solved by damped scoring theta <- theta + [Omega^W + 2 lambda I]^{-1} G_lambda.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "clreg/correlation.hpp"
#include "clreg/model.hpp"

namespace clreg {

/// Binary responses with optional grouping (empty groups = no grouping).
struct BinaryData {
  VectorXd y;
  GroupIndex groups;

  Index size() const { return y.size(); }
  bool grouped() const { return !groups.empty(); }
  BinaryData subset(const std::vector<Index>& rows) const;
};

/// Model options plus solver controls.
struct FitOptions {
  bool cop_flag = false;      // force a positive biomarker gradient (log-slope parametrization)
  bool exchangeable = false;  // estimate an exchangeable correlation from the independence fit
  bool quasi_lik = false;     // refit with W = V-hat once rho is estimated
  double lambda = 0.0;        // ridge constant, >= 0
  int max_iter = 100;
  double tol = 1e-8;          // on ||theta_{n+1} - theta_n||_inf
  double grad_tol = 1e-6;     // ||G_lambda||_inf <= grad_tol * (n + ||y||_1)
  int step_halving_max = 10;

  void validate() const;
};

enum class FitStatus {
  Converged,
  MaxIterations,
  StepHalvingExhausted,
  RankDeficient,
  NonFinite,
  Diverged,
  CorrelationFailed,
};

std::string to_string(FitStatus s);

/// G_lambda(theta) = G(theta) - 2 lambda theta, with W = W_theta from `working`.
VectorXd estimating_fn(const ModelSpec& spec, const VectorXd& y, const VectorXd& theta,
                       const CorrelationStructure& working, double lambda = 0.0);

struct OmegaSet {
  MatrixXd omega_w;   // Gamma^T W^{-1} Gamma
  MatrixXd omega_v;   // Gamma^T V^{-1} Gamma
  MatrixXd omega_wv;  // Gamma^T W^{-1} V W^{-1} Gamma
};

OmegaSet omegas(const ModelSpec& spec, const VectorXd& theta, const CorrelationStructure& working,
                const CorrelationStructure& truth);

/// Same, from an explicit Gamma and covariance pair.
OmegaSet omegas(const MatrixXd& gamma, const WorkingCovariance& w, const WorkingCovariance& v);

/// [Omega^W + lambda I]^{-1} Omega^WV [Omega^W + lambda I]^{-1}.
/// Throws RankDeficiencyError when the bread is numerically singular.
MatrixXd sandwich_covariance(const OmegaSet& om, double lambda);

MatrixXd covariance(const ModelSpec& spec, const VectorXd& theta, const CorrelationStructure& working,
                    const CorrelationStructure& truth, double lambda);

/// Outcome of one run of the scoring iteration with a fixed working structure.
struct IterationResult {
  VectorXd theta;
  FitStatus status = FitStatus::MaxIterations;
  int iterations = 0;
  double grad_norm = 0.0;
  double grad_threshold = 0.0;
  double min_singular_value = 0.0;  // of Gamma at the last iterate
  bool converged() const { return status == FitStatus::Converged; }
};

IterationResult iterate(const ModelSpec& spec, const VectorXd& y, const CorrelationStructure& working,
                        const VectorXd& theta0, const FitOptions& options);

struct WaldRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

struct FitResult {
  VectorXd theta;          // internal parametrization
  MatrixXd covariance;     // empty unless converged
  std::optional<RhoEstimate> rho;
  bool converged = false;
  FitStatus status = FitStatus::MaxIterations;
  int iterations = 0;      // total over all stages
  double final_grad_norm = 0.0;
  double grad_threshold = 0.0;
  CorrelationStructure working;  // W used for the final estimates
  CorrelationStructure truth;    // V used for inference
  std::vector<WaldRow> wald;
  std::optional<WaldRow> slope;  // exp(xi) with delta-method SE under reparametrization
};

/// Full fitting procedure: independence fit, then (exchangeable) rho-hat and
/// either a sandwich with V-hat or (quasi_lik) a refit with W = V-hat.
/// Numerical failures are reported in FitResult::status.
FitResult solve(const ModelSpec& spec, const BinaryData& data, const FitOptions& options,
                const VectorXd& theta0);

/// Per-parameter estimate, SE, Z and two-sided normal p-value. Under a
/// reversed biomarker the starred coefficients are reported for the original
/// variable.
std::vector<WaldRow> wald_table(const ModelSpec& spec, const VectorXd& theta, const MatrixXd& cov);

struct Band {
  VectorXd pi_hat;
  VectorXd lower;
  VectorXd upper;
  double critical_value = 0.0;
};

/// z_{1-a/2} (marginal) or sqrt(chi2_{p, 1-a}) (simultaneous).
double band_critical_value(double level, Index p, bool simultaneous);

/// Pointwise band pi-hat +/- c * sqrt(g^T Sigma g), g = d pi(x) / d theta,
/// clipped to [0, 1]. `at` holds the new design rows.
Band confidence_band(const FitResult& fit, const ModelSpec& at, double level, bool simultaneous);

}  // namespace clreg
