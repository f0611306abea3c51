#include "clreg/bvn.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "clreg/error.hpp"
#include "clreg/stats.hpp"

namespace clreg {

// Plackett's identity:
//   Phi2(h, k; r) = Phi(h) Phi(k)
//                 + (1 / 2pi) int_0^{asin r} exp(-(h^2 + k^2 - 2 h k sin t) / (2 cos^2 t)) dt
double bivariate_normal_cdf(double h, double k, double r) {
  if (!(r >= -1.0 && r <= 1.0)) throw DomainError("bivariate_normal_cdf: |r| > 1");
  const double ph = stats::normal_cdf(h);
  const double pk = stats::normal_cdf(k);
  if (r == 1.0) return std::min(ph, pk);
  if (r == -1.0) return std::max(0.0, ph + pk - 1.0);
  if (r == 0.0) return ph * pk;

  const double hs = 0.5 * (h * h + k * k);
  const double hk = h * k;
  auto integrand = [&](double t) {
    const double s = std::sin(t);
    const double c2 = 1.0 - s * s;
    if (c2 <= 0.0) return 0.0;
    return std::exp((hk * s - hs) / c2);
  };
  const double upper = std::asin(r);
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, upper, 8, 1e-12);
  const double p = ph * pk + integral / boost::math::constants::two_pi<double>();
  return std::clamp(p, 0.0, std::min(ph, pk));
}

}  // namespace clreg
