#pragma once

// Working covariance V = D(tau)^{1/2} R D(tau)^{1/2} with independent or
// exchangeable R, stored block-diagonally by group.

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace clreg {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Observation indices of each group, in order of first appearance.
using GroupIndex = std::vector<std::vector<Index>>;

/// Builds the group partition from per-observation labels.
GroupIndex make_groups(const std::vector<long>& labels);

std::size_t largest_group(const GroupIndex& groups);

/// Lower bound on rho for a positive-definite exchangeable block of size g.
double exchangeable_lower_bound(std::size_t g);

struct CorrelationStructure {
  enum class Kind { Independent, Exchangeable };
  Kind kind = Kind::Independent;
  GroupIndex groups;  // required for Exchangeable
  double rho = 0.0;

  static CorrelationStructure independent() { return {}; }
  static CorrelationStructure exchangeable(GroupIndex groups, double rho) {
    return {Kind::Exchangeable, std::move(groups), rho};
  }
  bool is_independent() const { return kind == Kind::Independent; }
};

VectorXd pearson_residuals(const VectorXd& y, const VectorXd& pi, const VectorXd& tau);

struct RhoEstimate {
  double raw = 0.0;      // moment estimate before clipping
  double clipped = 0.0;  // inside the positive-definiteness interval
  long pairs = 0;
};

/// rho = (N_pair - d)^{-1} sum_g sum_{i<i' in g} r_i r_i'.
/// Throws DomainError when there are no within-group pairs or N_pair <= d.
RhoEstimate estimate_rho(const VectorXd& residuals, const GroupIndex& groups, Index d);

/// Symmetric positive-definite working covariance. Exchangeable structures
/// keep one dense Cholesky-factored block per group; nothing n x n is formed.
class WorkingCovariance {
 public:
  WorkingCovariance(const VectorXd& tau, const CorrelationStructure& structure);

  Index size() const { return tau_.size(); }
  bool diagonal() const { return blocks_.empty(); }

  /// V^{-1} B.
  MatrixXd solve(const MatrixXd& b) const;
  /// V B.
  MatrixXd multiply(const MatrixXd& b) const;
  /// r^T V^{-1} r.
  double inverse_quadratic_form(const VectorXd& r) const;
  /// Dense copy, for tests and small problems.
  MatrixXd dense() const;

 private:
  struct Block {
    std::vector<Index> index;
    MatrixXd matrix;
    Eigen::LLT<MatrixXd> factor;
  };

  VectorXd tau_;
  std::vector<Block> blocks_;
  std::vector<Index> singletons_;  // observations not in a multi-member block
};

WorkingCovariance build_covariance(const VectorXd& tau, const CorrelationStructure& structure);

inline MatrixXd solve_with_covariance(const WorkingCovariance& v, const MatrixXd& b) {
  return v.solve(b);
}

}  // namespace clreg
