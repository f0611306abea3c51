#pragma once

// Starting values from the four-parameter double-asymptote curve
//   pi(z) = a_L + (a_U - a_L) phi(alpha (z - z_thr)).

#include <Eigen/Dense>
#include <string>

#include <optional>

#include "clreg/estimator.hpp"
#include "clreg/model.hpp"

namespace clreg {

/// Fit of the four-parameter curve in canonical orientation: alpha > 0 and
/// a_lower <= a_upper along the oriented biomarker v = (flipped ? -z : z).
/// z_thr is the curve midpoint in the original z units.
struct FourParamFit {
  double alpha = 1.0;
  double z_thr = 0.0;
  double a_lower = 0.5;
  double a_upper = 0.5;
  bool flipped = false;
  double loglik = 0.0;
  std::string warning;  // set for degenerate responses
};

/// Approximate maximizer of the independence log-likelihood: a quantile x
/// log-slope grid with profiled asymptotes, then up to 200 damped
/// Fisher-scoring refinements. Throws DataError for n < 4, constant z or
/// non-binary y.
FourParamFit fit_four_param(const VectorXd& z, const VectorXd& y);

/// The fitted curve evaluated at z.
VectorXd four_param_curve(const FourParamFit& fit, const VectorXd& z);

struct InitialSolution {
  ModelSpec spec;  // biomarker orientation applied
  VectorXd theta;
};

/// Maps the four-parameter fit onto the compound model. The biomarker
/// component gets slope/threshold (log-slope and starred intercept under
/// reparametrization); the asymptote components get logit intercepts; all
/// other coefficients are zero.
InitialSolution map_initial(const FourParamFit& fit, const ModelSpec& spec);

/// A fit together with the (possibly re-oriented) model it refers to.
struct ModelFit {
  ModelSpec spec;
  FitResult fit;
  std::optional<FourParamFit> start;
};

/// Runs the whole procedure. Without theta0, a model with a designated
/// biomarker starts from the four-parameter fit; otherwise from zero.
ModelFit fit_model(const ModelSpec& spec, const BinaryData& data, const FitOptions& options,
                   const std::optional<VectorXd>& theta0 = std::nullopt);

}  // namespace clreg
