#include "clreg/estimator.hpp"

#include <cmath>
#include <sstream>

#include "clreg/error.hpp"
#include "clreg/stats.hpp"

namespace clreg {

BinaryData BinaryData::subset(const std::vector<Index>& rows) const {
  BinaryData out;
  out.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out.y(r) = y(rows[r]);
  if (grouped()) {
    // Relabel groups by position in the subset.
    std::vector<long> group_of(static_cast<std::size_t>(y.size()), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (Index i : groups[g]) group_of[i] = static_cast<long>(g);
    std::vector<long> labels(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) labels[r] = group_of[rows[r]];
    out.groups = make_groups(labels);
  }
  return out;
}

void FitOptions::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (!(grad_tol > 0.0)) throw ConfigError("grad_tol must be > 0");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (step_halving_max < 0) throw ConfigError("step_halving_max must be >= 0");
  if (quasi_lik && !exchangeable) throw ConfigError("quasi_lik requires exchangeable");
}

std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Converged:
      return "converged";
    case FitStatus::MaxIterations:
      return "max_iterations";
    case FitStatus::StepHalvingExhausted:
      return "step_halving_exhausted";
    case FitStatus::RankDeficient:
      return "rank_deficient";
    case FitStatus::NonFinite:
      return "non_finite";
    case FitStatus::Diverged:
      return "diverged";
    case FitStatus::CorrelationFailed:
      return "correlation_failed";
  }
  return "?";
}

namespace {

constexpr double kSingularRatio = 1e-10;
constexpr double kNewtonRadius = 0.1;  // on the scoring step, sup norm
constexpr double kDivergenceBound = 1e4;

// Everything the iteration needs at one parameter value.
struct Evaluation {
  MeanState state;
  MatrixXd gamma;
  MatrixXd winv_gamma;  // W^{-1} Gamma
  VectorXd g;           // unpenalized G
  VectorXd g_lambda;
  double merit = 0.0;   // penalized Bernoulli log-likelihood
};

Evaluation evaluate(const ModelSpec& spec, const VectorXd& y, const VectorXd& theta,
                    const CorrelationStructure& working, double lambda) {
  Evaluation ev;
  ev.state = mean_state(spec, theta);
  ev.gamma = gradient_matrix(spec, theta, ev.state);
  const WorkingCovariance w(ev.state.tau, working);
  ev.winv_gamma = w.solve(ev.gamma);
  ev.g = ev.winv_gamma.transpose() * (y - ev.state.pi);
  ev.g_lambda = ev.g - 2.0 * lambda * theta;
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i)
    ll += y(i) * std::log(ev.state.pi(i)) + (1.0 - y(i)) * std::log1p(-ev.state.pi(i));
  ev.merit = ll - lambda * theta.squaredNorm();
  return ev;
}

// -dG_lambda / dtheta by central differences, W re-evaluated at each point.
MatrixXd jacobian(const ModelSpec& spec, const VectorXd& y, const VectorXd& theta,
                  const CorrelationStructure& working, double lambda) {
  const Index p = theta.size();
  MatrixXd jac(p, p);
  for (Index j = 0; j < p; ++j) {
    const double h = 1e-5 * (1.0 + std::fabs(theta(j)));
    VectorXd up = theta, down = theta;
    up(j) += h;
    down(j) -= h;
    jac.col(j) = (evaluate(spec, y, down, working, lambda).g_lambda -
                  evaluate(spec, y, up, working, lambda).g_lambda) / (2.0 * h);
  }
  return jac;
}

// Smallest / largest eigenvalue of a symmetric matrix.
std::pair<double, double> eigen_range(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

bool singular(const std::pair<double, double>& range) {
  return !(range.second > 0.0) || range.first <= kSingularRatio * range.second;
}

}  // namespace

VectorXd estimating_fn(const ModelSpec& spec, const VectorXd& y, const VectorXd& theta,
                       const CorrelationStructure& working, double lambda) {
  if (y.size() != spec.rows()) throw DimensionError("response length does not match design rows");
  return evaluate(spec, y, theta, working, lambda).g_lambda;
}

OmegaSet omegas(const MatrixXd& gamma, const WorkingCovariance& w, const WorkingCovariance& v) {
  if (gamma.rows() != w.size() || gamma.rows() != v.size())
    throw DimensionError("omegas: Gamma and covariance sizes differ");
  OmegaSet om;
  const MatrixXd winv_gamma = w.solve(gamma);
  om.omega_w = gamma.transpose() * winv_gamma;
  om.omega_v = gamma.transpose() * v.solve(gamma);
  om.omega_wv = winv_gamma.transpose() * v.multiply(winv_gamma);
  // Symmetrize away rounding.
  om.omega_w = 0.5 * (om.omega_w + om.omega_w.transpose()).eval();
  om.omega_v = 0.5 * (om.omega_v + om.omega_v.transpose()).eval();
  om.omega_wv = 0.5 * (om.omega_wv + om.omega_wv.transpose()).eval();
  return om;
}

OmegaSet omegas(const ModelSpec& spec, const VectorXd& theta, const CorrelationStructure& working,
                const CorrelationStructure& truth) {
  const MeanState state = mean_state(spec, theta);
  const MatrixXd gamma = gradient_matrix(spec, theta, state);
  return omegas(gamma, WorkingCovariance(state.tau, working), WorkingCovariance(state.tau, truth));
}

MatrixXd sandwich_covariance(const OmegaSet& om, double lambda) {
  const Index p = om.omega_w.rows();
  const MatrixXd bread = om.omega_w + lambda * MatrixXd::Identity(p, p);
  const auto range = eigen_range(bread);
  if (singular(range)) {
    throw RankDeficiencyError("covariance: Omega^W + lambda I is numerically singular",
                              std::sqrt(std::max(range.first, 0.0)));
  }
  const Eigen::LDLT<MatrixXd> ldlt(bread);
  const MatrixXd left = ldlt.solve(om.omega_wv);
  MatrixXd sigma = ldlt.solve(left.transpose());
  return 0.5 * (sigma + sigma.transpose());
}

MatrixXd covariance(const ModelSpec& spec, const VectorXd& theta, const CorrelationStructure& working,
                    const CorrelationStructure& truth, double lambda) {
  return sandwich_covariance(omegas(spec, theta, working, truth), lambda);
}

IterationResult iterate(const ModelSpec& spec, const VectorXd& y, const CorrelationStructure& working,
                        const VectorXd& theta0, const FitOptions& options) {
  if (y.size() != spec.rows()) throw DimensionError("response length does not match design rows");
  if (theta0.size() != spec.params()) throw DimensionError("theta0 has the wrong length");
  const double lambda = options.lambda;
  const Index p = spec.params();

  IterationResult res;
  res.theta = theta0;
  res.grad_threshold = options.grad_tol * (static_cast<double>(y.size()) + y.cwiseAbs().sum());
  if (!theta0.allFinite()) {
    res.status = FitStatus::NonFinite;
    return res;
  }

  Evaluation ev = evaluate(spec, y, res.theta, working, lambda);
  res.grad_norm = ev.g_lambda.lpNorm<Eigen::Infinity>();
  for (int it = 1; it <= options.max_iter; ++it) {
    res.iterations = it;
    const MatrixXd omega = ev.gamma.transpose() * ev.winv_gamma;
    const MatrixXd a = omega + 2.0 * lambda * MatrixXd::Identity(p, p);
    const auto range = eigen_range(0.5 * (a + a.transpose()));
    res.min_singular_value = std::sqrt(std::max(range.first, 0.0));
    if (!ev.g_lambda.allFinite() || !omega.allFinite()) {
      res.status = FitStatus::NonFinite;
      return res;
    }
    if (singular(range)) {
      res.status = FitStatus::RankDeficient;
      return res;
    }
    const Eigen::LDLT<MatrixXd> a_ldlt(a);
    const VectorXd step = a_ldlt.solve(ev.g_lambda);

    // Step acceptance guards against non-finite values and overshooting. With
    // slope = G_lambda . d, a step s d must not overshoot the root along the
    // search line by more than half (G_lambda(theta + s d) . d >= -slope / 2).
    // Under independence G_lambda is the gradient of the penalized
    // log-likelihood, whose gain must also reach s * slope / 4; that test is
    // replaced by the overshoot test once the gain is lost in rounding. Under a
    // correlated working structure the overshoot test or shrinkage of the
    // simplified correction (natural monotonicity) is required.
    const bool likelihood = working.kind == CorrelationStructure::Kind::Independent;
    const double noise = 1e-13 * (1.0 + std::fabs(ev.merit));
    auto acceptable = [&](const VectorXd& d, double scale, const Evaluation& trial, const VectorXd& correction) {
      const double slope = ev.g_lambda.dot(d);
      const double gain = trial.merit - ev.merit;
      const bool no_overshoot = trial.g_lambda.dot(d) >= -0.5 * slope;
      if (likelihood)
        return (gain > noise && gain >= 0.25 * scale * slope) || (std::fabs(gain) <= noise && no_overshoot);
      return no_overshoot || correction.norm() <= (1.0 - 0.25 * scale) * d.norm();
    };

    bool accepted = false;
    VectorXd candidate;
    Evaluation next;
    // Near the root scoring converges only linearly; a full Newton step on the
    // exact Jacobian is tried first and kept if it passes the same test.
    if (step.lpNorm<Eigen::Infinity>() <= kNewtonRadius) {
      const Eigen::PartialPivLU<MatrixXd> j_lu(jacobian(spec, y, res.theta, working, lambda));
      const VectorXd newton = j_lu.solve(ev.g_lambda);
      if (newton.allFinite() && ev.g_lambda.dot(newton) > 0.0) {
        candidate = res.theta + newton;
        next = evaluate(spec, y, candidate, working, lambda);
        accepted = next.g_lambda.allFinite() && acceptable(newton, 1.0, next, j_lu.solve(next.g_lambda));
      }
    }
    const bool tiny = step.lpNorm<Eigen::Infinity>() <= options.tol;
    const double step_norm = step.norm();
    double scale = 1.0;
    for (int h = 0; !accepted && h <= options.step_halving_max; ++h, scale *= 0.5) {
      candidate = res.theta + scale * step;
      if (!candidate.allFinite()) continue;
      next = evaluate(spec, y, candidate, working, lambda);
      if (!next.g_lambda.allFinite()) continue;
      // Steps below the tolerance (or from an exact root) cannot show progress.
      accepted = tiny || step_norm == 0.0 || acceptable(step, scale, next, a_ldlt.solve(next.g_lambda));
    }
    if (!accepted) {
      res.status = FitStatus::StepHalvingExhausted;
      return res;
    }

    const double delta = (candidate - res.theta).lpNorm<Eigen::Infinity>();
    res.theta = candidate;
    ev = std::move(next);
    res.grad_norm = ev.g_lambda.lpNorm<Eigen::Infinity>();
    if (res.theta.lpNorm<Eigen::Infinity>() > kDivergenceBound) {
      res.status = FitStatus::Diverged;
      return res;
    }
    if (delta <= options.tol && res.grad_norm <= res.grad_threshold) {
      res.status = FitStatus::Converged;
      return res;
    }
  }
  res.status = FitStatus::MaxIterations;
  return res;
}

std::vector<WaldRow> wald_table(const ModelSpec& spec, const VectorXd& theta, const MatrixXd& cov) {
  const Index p = theta.size();
  if (cov.rows() != p || cov.cols() != p) throw DimensionError("wald_table: covariance shape");
  // Under a reversed biomarker, eta = -exp(xi) (z + eta_star), so the starred
  // coefficients for the original variable are the negated internal ones.
  VectorXd sign = VectorXd::Ones(p);
  if (spec.biomarker && spec.biomarker->reparametrize && spec.biomarker->sign < 0) {
    const auto& b = *spec.biomarker;
    const auto& x = spec.designs[b.component];
    for (Index j = 0; j < p; ++j)
      if (j != b.column && x.col(j).cwiseAbs().maxCoeff() > 0.0) sign(j) = -1.0;
  }
  std::vector<WaldRow> rows;
  rows.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    WaldRow r;
    r.name = j < static_cast<Index>(spec.param_names.size()) ? spec.param_names[j]
                                                              : "theta[" + std::to_string(j) + "]";
    r.estimate = sign(j) * theta(j);
    r.se = std::sqrt(std::max(cov(j, j), 0.0));
    r.z = r.se > 0.0 ? r.estimate / r.se : (r.estimate == 0.0 ? 0.0 : std::copysign(INFINITY, r.estimate));
    r.p_value = stats::two_sided_p(r.z);
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::optional<WaldRow> slope_row(const ModelSpec& spec, const VectorXd& theta, const MatrixXd& cov) {
  if (!spec.biomarker || !spec.biomarker->reparametrize) return std::nullopt;
  const Index j = spec.biomarker->column;
  WaldRow r;
  r.name = "exp(" + (j < static_cast<Index>(spec.param_names.size()) ? spec.param_names[j]
                                                                      : std::string("xi")) + ")";
  r.estimate = std::exp(theta(j));
  r.se = r.estimate * std::sqrt(std::max(cov(j, j), 0.0));
  r.z = r.se > 0.0 ? r.estimate / r.se : 0.0;
  r.p_value = stats::two_sided_p(r.z);
  return r;
}

void finish(FitResult& fit, const ModelSpec& spec, const FitOptions& options) {
  try {
    fit.covariance = covariance(spec, fit.theta, fit.working, fit.truth, options.lambda);
  } catch (const RankDeficiencyError&) {
    fit.converged = false;
    fit.status = FitStatus::RankDeficient;
    return;
  }
  fit.wald = wald_table(spec, fit.theta, fit.covariance);
  fit.slope = slope_row(spec, fit.theta, fit.covariance);
}

void absorb(FitResult& fit, const IterationResult& it) {
  fit.theta = it.theta;
  fit.status = it.status;
  fit.converged = it.converged();
  fit.iterations += it.iterations;
  fit.final_grad_norm = it.grad_norm;
  fit.grad_threshold = it.grad_threshold;
}

}  // namespace

FitResult solve(const ModelSpec& spec, const BinaryData& data, const FitOptions& options,
                const VectorXd& theta0) {
  spec.validate();
  options.validate();
  if (data.size() != spec.rows()) throw DimensionError("data and design row counts differ");
  if (options.cop_flag && !(spec.biomarker && spec.biomarker->reparametrize))
    throw ConfigError("cop_flag requires a reparametrized biomarker in the model");
  if (options.exchangeable && !data.grouped())
    throw ConfigError("exchangeable correlation requires group labels");

  FitResult fit;
  fit.working = CorrelationStructure::independent();
  fit.truth = CorrelationStructure::independent();

  // Independence (maximum likelihood) fit.
  absorb(fit, iterate(spec, data.y, fit.working, theta0, options));
  if (!fit.converged) return fit;

  if (options.exchangeable) {
    const MeanState state = mean_state(spec, fit.theta);
    try {
      fit.rho = estimate_rho(pearson_residuals(data.y, state.pi, state.tau), data.groups,
                             spec.params());
    } catch (const DomainError&) {
      fit.converged = false;
      fit.status = FitStatus::CorrelationFailed;
      return fit;
    }
    const auto v_hat = CorrelationStructure::exchangeable(data.groups, fit.rho->clipped);
    fit.truth = v_hat;
    if (options.quasi_lik) {
      fit.working = v_hat;
      absorb(fit, iterate(spec, data.y, fit.working, fit.theta, options));
      if (!fit.converged) return fit;
    }
  }
  finish(fit, spec, options);
  return fit;
}

double band_critical_value(double level, Index p, bool simultaneous) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must be in (0, 1)");
  if (simultaneous) return std::sqrt(stats::chi_squared_quantile(static_cast<double>(p), level));
  return stats::normal_quantile(0.5 + 0.5 * level);
}

Band confidence_band(const FitResult& fit, const ModelSpec& at, double level, bool simultaneous) {
  if (fit.covariance.rows() != at.params())
    throw DimensionError("confidence_band: fit has no covariance for this model");
  const MeanState state = mean_state(at, fit.theta);
  const MatrixXd g = gradient_matrix(at, fit.theta, state);
  Band band;
  band.critical_value = band_critical_value(level, at.params(), simultaneous);
  band.pi_hat = state.pi;
  const VectorXd var = (g * fit.covariance).cwiseProduct(g).rowwise().sum();
  const VectorXd half = band.critical_value * var.cwiseMax(0.0).cwiseSqrt();
  band.lower = (band.pi_hat - half).cwiseMax(0.0);
  band.upper = (band.pi_hat + half).cwiseMin(1.0);
  return band;
}

}  // namespace clreg
