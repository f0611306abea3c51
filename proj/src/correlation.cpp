#include "clreg/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "clreg/error.hpp"

namespace clreg {

GroupIndex make_groups(const std::vector<long>& labels) {
  GroupIndex groups;
  std::map<long, std::size_t> slot;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(labels[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(static_cast<Index>(i));
  }
  return groups;
}

std::size_t largest_group(const GroupIndex& groups) {
  std::size_t g = 0;
  for (const auto& members : groups) g = std::max(g, members.size());
  return g;
}

double exchangeable_lower_bound(std::size_t g) {
  if (g < 2) return -std::numeric_limits<double>::infinity();
  return -1.0 / static_cast<double>(g - 1);
}

VectorXd pearson_residuals(const VectorXd& y, const VectorXd& pi, const VectorXd& tau) {
  if (y.size() != pi.size() || y.size() != tau.size())
    throw DimensionError("pearson_residuals: length mismatch");
  if ((tau.array() <= 0.0).any()) throw DomainError("pearson_residuals: non-positive variance");
  return (y - pi).array() / tau.array().sqrt();
}

RhoEstimate estimate_rho(const VectorXd& residuals, const GroupIndex& groups, Index d) {
  double total = 0.0;
  long pairs = 0;
  for (const auto& members : groups) {
    const std::size_t g = members.size();
    if (g < 2) continue;
    for (std::size_t a = 0; a < g; ++a)
      for (std::size_t b = a + 1; b < g; ++b) total += residuals(members[a]) * residuals(members[b]);
    pairs += static_cast<long>(g * (g - 1) / 2);
  }
  if (pairs == 0) throw DomainError("estimate_rho: no within-group pairs");
  if (pairs <= d) {
    std::ostringstream msg;
    msg << "estimate_rho: " << pairs << " within-group pairs do not exceed " << d
        << " estimated parameters";
    throw DomainError(msg.str());
  }
  RhoEstimate est;
  est.pairs = pairs;
  est.raw = total / static_cast<double>(pairs - d);
  const double lo = exchangeable_lower_bound(largest_group(groups)) + 1e-6;
  est.clipped = std::clamp(est.raw, lo, 1.0 - 1e-6);
  return est;
}

WorkingCovariance::WorkingCovariance(const VectorXd& tau, const CorrelationStructure& structure)
    : tau_(tau) {
  if ((tau.array() <= 0.0).any() || !tau.allFinite())
    throw NotPositiveDefiniteError("working covariance: variances must be positive");
  if (structure.is_independent()) return;

  const double rho = structure.rho;
  const double lo = exchangeable_lower_bound(largest_group(structure.groups));
  if (!(rho > lo && rho < 1.0)) {
    std::ostringstream msg;
    msg << "exchangeable correlation " << rho << " outside the positive-definite range (" << lo
        << ", 1)";
    throw NotPositiveDefiniteError(msg.str());
  }

  std::vector<char> seen(static_cast<std::size_t>(tau.size()), 0);
  for (const auto& members : structure.groups) {
    for (Index i : members) {
      if (i < 0 || i >= tau.size() || seen[i])
        throw DimensionError("group labels do not partition the observations");
      seen[i] = 1;
    }
    if (members.size() < 2) {
      singletons_.push_back(members.front());
      continue;
    }
    Block block;
    block.index = members;
    const Index g = static_cast<Index>(members.size());
    VectorXd s(g);
    for (Index a = 0; a < g; ++a) s(a) = std::sqrt(tau(members[a]));
    block.matrix = rho * s * s.transpose();
    block.matrix.diagonal() = s.array().square();
    block.factor.compute(block.matrix);
    if (block.factor.info() != Eigen::Success)
      throw NotPositiveDefiniteError("working covariance block is not positive definite");
    blocks_.push_back(std::move(block));
  }
  for (Index i = 0; i < tau.size(); ++i)
    if (!seen[i]) singletons_.push_back(i);
}

MatrixXd WorkingCovariance::solve(const MatrixXd& b) const {
  if (b.rows() != size()) throw DimensionError("solve: row count mismatch");
  if (diagonal()) return tau_.cwiseInverse().asDiagonal() * b;
  MatrixXd out(b.rows(), b.cols());
  for (Index i : singletons_) out.row(i) = b.row(i) / tau_(i);
  for (const auto& block : blocks_) {
    const Index g = static_cast<Index>(block.index.size());
    MatrixXd rhs(g, b.cols());
    for (Index a = 0; a < g; ++a) rhs.row(a) = b.row(block.index[a]);
    const MatrixXd x = block.factor.solve(rhs);
    for (Index a = 0; a < g; ++a) out.row(block.index[a]) = x.row(a);
  }
  return out;
}

MatrixXd WorkingCovariance::multiply(const MatrixXd& b) const {
  if (b.rows() != size()) throw DimensionError("multiply: row count mismatch");
  if (diagonal()) return tau_.asDiagonal() * b;
  MatrixXd out(b.rows(), b.cols());
  for (Index i : singletons_) out.row(i) = b.row(i) * tau_(i);
  for (const auto& block : blocks_) {
    const Index g = static_cast<Index>(block.index.size());
    MatrixXd rhs(g, b.cols());
    for (Index a = 0; a < g; ++a) rhs.row(a) = b.row(block.index[a]);
    const MatrixXd x = block.matrix * rhs;
    for (Index a = 0; a < g; ++a) out.row(block.index[a]) = x.row(a);
  }
  return out;
}

double WorkingCovariance::inverse_quadratic_form(const VectorXd& r) const {
  return r.dot(solve(r).col(0));
}

MatrixXd WorkingCovariance::dense() const {
  MatrixXd v = MatrixXd::Zero(size(), size());
  v.diagonal() = tau_;
  for (const auto& block : blocks_) {
    const Index g = static_cast<Index>(block.index.size());
    for (Index a = 0; a < g; ++a)
      for (Index c = 0; c < g; ++c) v(block.index[a], block.index[c]) = block.matrix(a, c);
  }
  return v;
}

WorkingCovariance build_covariance(const VectorXd& tau, const CorrelationStructure& structure) {
  return WorkingCovariance(tau, structure);
}

}  // namespace clreg
