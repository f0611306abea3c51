#pragma once

// Correlated binary data and the Monte Carlo coverage study.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clreg/correlation.hpp"
#include "clreg/estimator.hpp"
#include "clreg/model.hpp"
#include "clreg/rng.hpp"

namespace clreg {

/// Latent correlation r such that thresholded exchangeable normals with
/// correlation r have average pairwise binary Pearson correlation `rho`
/// for marginals `pi`. Throws DomainError naming the offending pair when
/// `rho` is out of reach.
double latent_correlation(const std::vector<double>& pi, double rho, double tol = 1e-6);

/// Pearson correlation of (1{Z1 > Phi^-1(1-p1)}, 1{Z2 > Phi^-1(1-p2)}) for
/// standard normals with correlation r.
double binary_correlation(double p1, double p2, double r);

/// Gaussian-copula sampler for exchangeable binary groups. Calibration
/// happens once in the constructor; draw() is const and thread-safe.
class ExchangeableBinarySampler {
 public:
  /// `groups` may be empty (all observations independent).
  ExchangeableBinarySampler(const VectorXd& pi, const GroupIndex& groups, double rho);

  VectorXd draw(Philox4x32& rng) const;

  Index size() const { return thresholds_.size(); }
  const std::vector<double>& latent_rho() const { return latent_; }

 private:
  VectorXd thresholds_;  // Phi^-1(1 - pi_i)
  GroupIndex groups_;     // every observation appears exactly once
  std::vector<double> latent_;
  std::vector<MatrixXd> factors_;  // lower Cholesky factor for negative latent correlation
};

VectorXd simulate_exchangeable_binary(const VectorXd& pi, const GroupIndex& groups, double rho,
                                      Philox4x32& rng);

/// Consecutive groups of `size`; the last group may be smaller.
GroupIndex consecutive_groups(Index n, Index size);

/// Two-covariate design with the biomarker z thresholded in component 1 and
/// a binary covariate x in components 2 and 3:
///   eta_1 = exp(xi) (z - b*[0,1]),  eta_2 = b[0,2] + b[1,2] x,  eta_3 = b[0,3] + b[1,3] x.
ModelSpec two_covariate_design(Compounding h, const VectorXd& z, const VectorXd& x);

struct StudyConfig {
  Index n = 200;
  Index group_size = 5;
  double rho = 0.1;
  Compounding h = Compounding::Asymptote;
  VectorXd theta_true;  // internal parametrization of two_covariate_design
  int n_sim = 2000;
  std::vector<double> lambdas{0.0, 0.1};
  std::uint64_t seed = 1;
  bool fixed_covariates = true;  // z ~ U[-1,1], x ~ Bernoulli(0.5)
  FitOptions options;            // lambda is taken from `lambdas`
  Index power_param = 5;
  double alpha_level = 0.05;
  unsigned threads = 1;

  void validate() const;
};

/// n = 200, groups of 5, rho = 0.1, asymptote model,
/// theta = (3, 0, log(1/3), 0, log 3, -2), cop_flag / exchangeable / quasi_lik on.
StudyConfig default_study();

struct Replication {
  int index = 0;
  double lambda = 0.0;
  bool converged = false;
  FitStatus status = FitStatus::MaxIterations;
  int iterations = 0;
  VectorXd estimate;  // as reported in the Wald table
  VectorXd se;
  double rho_hat = std::nan("");
  std::string error;  // set when the fit threw
};

struct ParamSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  std::array<double, 5> se_quantiles{};  // 0.01, 0.25, 0.5, 0.75, 0.99
  double coverage = 0.0;                 // of the nominal 95% interval
  double pct_abs_z_gt5 = 0.0;            // percent of |Z| > 5
};

struct LambdaSummary {
  double lambda = 0.0;
  int replications = 0;
  int converged = 0;
  double failure_rate = 0.0;
  std::vector<ParamSummary> params;  // over converged replications
  double rho_mean = std::nan("");
  double rho_sd = std::nan("");
  double power = std::nan("");  // for H0: theta[power_param] = 0
};

struct StudySummary {
  std::vector<std::string> names;
  VectorXd theta_true;
  Index power_param = 0;
  double alpha_level = 0.05;
  std::vector<LambdaSummary> blocks;      // one per lambda, in config order
  std::vector<Replication> replications;  // replication-major, then lambda
};

StudySummary run_study(const StudyConfig& config);

struct StudyDataset {
  VectorXd z;
  VectorXd x;
  GroupIndex groups;
  VectorXd y;
};

/// The covariates and response vector that run_study fits for `replication`.
StudyDataset study_dataset(const StudyConfig& config, int replication);

/// Fraction of converged replications of `block` with |estimate / SE| > z_{1 - a/2}.
/// Throws DomainError when no replication converged.
double power_estimate(const StudySummary& summary, std::size_t block, Index param, double alpha_level);

}  // namespace clreg
