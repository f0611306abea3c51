#pragma once

// K-fold cross-validation over a ridge grid.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clreg/correlation.hpp"
#include "clreg/estimator.hpp"
#include "clreg/model.hpp"

namespace clreg {

enum class GofScore { Deviance, AUC, SSE };

std::string to_string(GofScore s);
GofScore gof_score_from_string(const std::string& name);
/// Deviance and AUC are maximized, SSE minimized.
bool larger_is_better(GofScore s);

struct CvPlan {
  int folds = 5;
  std::uint64_t seed = 1;
  std::vector<double> lambda_grid{0.0};
  GofScore score = GofScore::Deviance;
  unsigned threads = 1;
};

/// Fold label (0..K-1) per observation. Grouped data are split by group.
/// Fold sizes (in observations, or in groups) differ by at most one.
std::vector<int> kfold_split(Index n, int folds, const GroupIndex& groups, std::uint64_t seed);

/// Log-likelihood form sum y log p + (1 - y) log(1 - p), p clamped.
double gof_deviance(const VectorXd& y, const VectorXd& yhat);

/// Concordance with half credit for ties. Throws DataError on a single class.
double gof_auc(const VectorXd& y, const VectorXd& yhat);

/// (y - yhat)^T V^{-1} (y - yhat).
double gof_sse(const VectorXd& y, const VectorXd& yhat, const WorkingCovariance& v);

struct CvRow {
  double lambda = 0.0;
  bool failed = false;
  int failed_folds = 0;
  double score = 0.0;
  VectorXd yhat_star;  // cross-validated fitted values, original row order
};

struct CvResult {
  std::vector<CvRow> table;  // ascending, de-duplicated lambdas
  double lambda_gof = 0.0;
  std::size_t selected = 0;  // index into table
  const VectorXd& yhat_star() const { return table[selected].yhat_star; }
};

/// Fits every (lambda, fold) pair with the full procedure on the training
/// rows. A lambda with any non-converged fold is marked failed and skipped;
/// ties go to the larger lambda. Throws ConvergenceError if every lambda fails.
CvResult cv_select(const ModelSpec& spec, const BinaryData& data, const FitOptions& options,
                   const CvPlan& plan, const std::optional<VectorXd>& theta0 = std::nullopt);

}  // namespace clreg
