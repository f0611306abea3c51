#pragma once

namespace clreg {

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation r.
double bivariate_normal_cdf(double h, double k, double r);

}  // namespace clreg
