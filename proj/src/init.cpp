#include "clreg/init.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "clreg/error.hpp"
#include "clreg/stats.hpp"

namespace clreg {

namespace {

constexpr double kAsymptoteFloor = 1e-6;
constexpr double kMaxLogSlope = 6.9;  // alpha * sd(z) <= ~1000
constexpr double kMinLogSlope = -6.9;

struct Params {
  double log_alpha;  // slope on the standardized biomarker
  double t;          // threshold on the standardized biomarker
  double a_lo;
  double a_hi;
};

double loglik(const VectorXd& u, const VectorXd& y, const Params& q) {
  const double alpha = std::exp(q.log_alpha);
  double ll = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double phi = logistic(alpha * (u(i) - q.t));
    const double p = clamp_probability(q.a_lo + (q.a_hi - q.a_lo) * phi);
    ll += y(i) > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

double quantile(const std::vector<double>& sorted, double prob) {
  return stats::quantile_sorted(sorted, prob);
}

Params project(Params q) {
  q.log_alpha = std::clamp(q.log_alpha, kMinLogSlope, kMaxLogSlope);
  q.a_lo = std::clamp(q.a_lo, kAsymptoteFloor, 1.0 - kAsymptoteFloor);
  q.a_hi = std::clamp(q.a_hi, kAsymptoteFloor, 1.0 - kAsymptoteFloor);
  return q;
}

Params grid_start(const VectorXd& u, const VectorXd& y) {
  std::vector<double> sorted(u.data(), u.data() + u.size());
  std::sort(sorted.begin(), sorted.end());
  const std::array<double, 7> log_slopes = {std::log(0.5), std::log(1.0), std::log(2.0), std::log(4.0),
                                            std::log(8.0), std::log(16.0), std::log(32.0)};
  Params best{0.0, 0.0, 0.5, 0.5};
  double best_ll = -INFINITY;
  for (int qi = 1; qi <= 19; ++qi) {
    const double t = quantile(sorted, 0.05 * qi);
    double below = 0.0, above = 0.0;
    double n_below = 0.0, n_above = 0.0;
    for (Index i = 0; i < u.size(); ++i) {
      if (u(i) < t) {
        below += y(i);
        n_below += 1.0;
      } else {
        above += y(i);
        n_above += 1.0;
      }
    }
    if (n_below == 0.0 || n_above == 0.0) continue;
    for (double ls : log_slopes) {
      const Params q = project({ls, t, below / n_below, above / n_above});
      const double ll = loglik(u, y, q);
      if (ll > best_ll) {
        best_ll = ll;
        best = q;
      }
    }
  }
  return best;
}

// Damped Fisher scoring on (log alpha, t, a_lo, a_hi), monotone in the log-likelihood.
Params refine(const VectorXd& u, const VectorXd& y, Params q) {
  double ll = loglik(u, y, q);
  for (int step = 0; step < 200; ++step) {
    const double alpha = std::exp(q.log_alpha);
    Eigen::Vector4d score = Eigen::Vector4d::Zero();
    Eigen::Matrix4d info = Eigen::Matrix4d::Zero();
    for (Index i = 0; i < u.size(); ++i) {
      const double phi = logistic(alpha * (u(i) - q.t));
      const double dphi = phi * (1.0 - phi);
      const double p = clamp_probability(q.a_lo + (q.a_hi - q.a_lo) * phi);
      const double w = 1.0 / (p * (1.0 - p));
      const double spread = q.a_hi - q.a_lo;
      const Eigen::Vector4d d(spread * dphi * alpha * (u(i) - q.t), -spread * dphi * alpha,
                              1.0 - phi, phi);
      score += (y(i) - p) * w * d;
      info.noalias() += w * d * d.transpose();
    }
    // Levenberg damping keeps the system solvable when the curve is flat.
    const double damping = 1e-8 * (1.0 + info.diagonal().maxCoeff());
    info.diagonal().array() += damping;
    const Eigen::Vector4d delta = info.ldlt().solve(score);
    if (!delta.allFinite()) break;

    double scale = 1.0;
    bool improved = false;
    Params next = q;
    double next_ll = ll;
    for (int h = 0; h < 30; ++h, scale *= 0.5) {
      next = project({q.log_alpha + scale * delta(0), q.t + scale * delta(1), q.a_lo + scale * delta(2),
                      q.a_hi + scale * delta(3)});
      next_ll = loglik(u, y, next);
      if (next_ll >= ll) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    const double change = std::max({std::fabs(next.log_alpha - q.log_alpha), std::fabs(next.t - q.t),
                                    std::fabs(next.a_lo - q.a_lo), std::fabs(next.a_hi - q.a_hi)});
    q = next;
    const double gain = next_ll - ll;
    ll = next_ll;
    if (change < 1e-10 || gain < 1e-12 * (1.0 + std::fabs(ll))) break;
  }
  return q;
}

}  // namespace

FourParamFit fit_four_param(const VectorXd& z, const VectorXd& y) {
  const Index n = z.size();
  if (y.size() != n) throw DimensionError("fit_four_param: z and y lengths differ");
  if (n < 4) throw DataError("fit_four_param: need at least 4 observations");
  for (Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw DataError("fit_four_param: response must be 0/1");
    if (!std::isfinite(z(i))) throw DataError("fit_four_param: non-finite biomarker value");
  }
  const double mean = z.mean();
  const double sd = std::sqrt((z.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw DataError("fit_four_param: biomarker is constant");
  const VectorXd u = (z.array() - mean) / sd;

  FourParamFit fit;
  const double ybar = y.mean();
  if (ybar == 0.0 || ybar == 1.0) {
    std::vector<double> sorted(u.data(), u.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double a = std::clamp(ybar, 0.01, 0.99);
    fit.alpha = 1.0 / sd;
    fit.z_thr = mean + sd * quantile(sorted, 0.5);
    fit.a_lower = fit.a_upper = a;
    fit.loglik = loglik(u, y, {0.0, quantile(sorted, 0.5), a, a});
    fit.warning = "response has a single class; returning a flat curve";
    return fit;
  }

  const Params q = refine(u, y, grid_start(u, y));
  fit.alpha = std::exp(q.log_alpha) / sd;
  fit.z_thr = mean + sd * q.t;
  fit.loglik = loglik(u, y, q);
  if (q.a_lo <= q.a_hi) {
    fit.a_lower = q.a_lo;
    fit.a_upper = q.a_hi;
  } else {
    // Decreasing in z: describe it as increasing in -z.
    fit.a_lower = q.a_hi;
    fit.a_upper = q.a_lo;
    fit.flipped = true;
  }
  return fit;
}

VectorXd four_param_curve(const FourParamFit& fit, const VectorXd& z) {
  const double s = fit.flipped ? -1.0 : 1.0;
  VectorXd out(z.size());
  for (Index i = 0; i < z.size(); ++i)
    out(i) = fit.a_lower + (fit.a_upper - fit.a_lower) * logistic(fit.alpha * s * (z(i) - fit.z_thr));
  return out;
}

namespace {

// First all-ones column of the component design other than `skip`.
Index intercept_column(const MatrixXd& x, Index skip) {
  for (Index j = 0; j < x.cols(); ++j) {
    if (j == skip || x.rows() == 0) continue;
    if ((x.col(j).array() == 1.0).all()) return j;
  }
  return -1;
}

double clamped_logit(double a) { return logit(std::clamp(a, 0.01, 0.99)); }

}  // namespace

InitialSolution map_initial(const FourParamFit& fit, const ModelSpec& spec) {
  spec.validate();
  if (!spec.biomarker) throw DomainError("map_initial: model has no designated biomarker");
  if (!(fit.alpha > 0.0) || !std::isfinite(fit.z_thr))
    throw DomainError("map_initial: four-parameter fit is not usable");

  InitialSolution init{spec, VectorXd::Zero(spec.params())};
  Biomarker& b = *init.spec.biomarker;
  if (b.component != 0)
    throw DomainError("map_initial: the biomarker must enter the first (threshold) component");

  const double canonical = fit.flipped ? -1.0 : 1.0;
  // Orientation of the model's biomarker variable v = sign * z. The asymptote
  // form describes either direction with u1 increasing in z (the asymptotes
  // swap instead); the vaccine efficacy form always decreases in u1.
  double sign = canonical;
  if (spec.h == Compounding::Asymptote) sign = 1.0;
  if (spec.h == Compounding::VaccineEfficacy) sign = -canonical;
  const double threshold = sign * fit.z_thr;  // midpoint on the v scale

  const MatrixXd& x = spec.designs[b.component];
  const Index icpt = intercept_column(x, b.column);
  if (b.reparametrize) {
    if (icpt < 0) throw DomainError("map_initial: reparametrized component needs an intercept");
    b.sign = sign;
    init.theta(b.column) = std::log(fit.alpha);
    init.theta(icpt) = threshold;
  } else {
    // eta = alpha (sign z - threshold); the raw design carries z unsigned.
    b.sign = 1.0;
    init.theta(b.column) = fit.alpha * sign;
    if (icpt >= 0) init.theta(icpt) = -fit.alpha * threshold;
  }

  auto set_intercept = [&](int component, double value) {
    const Index j = intercept_column(spec.designs[component], -1);
    if (j < 0) throw DomainError("map_initial: asymptote component needs an intercept");
    init.theta(j) = value;
  };
  switch (spec.h) {
    case Compounding::Logistic:
      break;
    case Compounding::Asymptote:
      // Components 2 and 3 carry the z -> -inf and z -> +inf asymptotes.
      set_intercept(1, clamped_logit(fit.flipped ? fit.a_upper : fit.a_lower));
      set_intercept(2, clamped_logit(fit.flipped ? fit.a_lower : fit.a_upper));
      break;
    case Compounding::VaccineEfficacy: {
      // Unprotected risk is the larger asymptote; efficacy = 1 - min / max.
      const double hi = std::max(fit.a_upper, kAsymptoteFloor);
      set_intercept(2, clamped_logit(hi));
      set_intercept(1, clamped_logit(1.0 - fit.a_lower / hi));
      break;
    }
  }
  return init;
}

ModelFit fit_model(const ModelSpec& spec, const BinaryData& data, const FitOptions& options,
                   const std::optional<VectorXd>& theta0) {
  ModelFit out{spec, {}, std::nullopt};
  VectorXd start;
  if (theta0) {
    start = *theta0;
  } else if (spec.biomarker) {
    out.start = fit_four_param(spec.biomarker_values(), data.y);
    InitialSolution init = map_initial(*out.start, spec);
    out.spec = std::move(init.spec);
    start = std::move(init.theta);
  } else {
    start = VectorXd::Zero(spec.params());
  }
  out.fit = solve(out.spec, data, options, start);
  return out;
}

}  // namespace clreg
