#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "relaynet/error.hpp"

namespace relaynet {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive 31-point Gauss-Kronrod on [a, b]; b may be +infinity.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double rel_tol = 1e-10,
                           unsigned max_depth = 18) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  QuadratureResult r;
  double l1 = 0.0;
  r.value = Rule::integrate(f, a, b, max_depth, rel_tol, &r.error, &l1);
  return r;
}

// E{f(X)} for X exponential with the given mean. The substitution
// X = -mean log(1 - u) turns the density into the uniform weight on [0, 1);
// tanh-sinh then absorbs the logarithmic growth of f at u -> 1. The
// complement 1 - u is taken from the rule itself so the tail stays finite.
template <class F>
QuadratureResult expect_exponential(F&& f, double mean, double rel_tol = 1e-10) {
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  QuadratureResult r;
  double l1 = 0.0;
  r.value = rule.integrate(
      [&](double u, double uc) -> double {
        // uc is b - u on the right half, a - u on the left
        const double x = u > 0.5 ? -mean * std::log(uc) : -mean * std::log1p(-u);
        return f(x);
      },
      0.0, 1.0, rel_tol, &r.error, &l1);
  return r;
}

// Fails loudly when the achieved error bound exceeds the requested absolute
// tolerance.
inline void require_converged(const QuadratureResult& r, double abs_tol, const char* what) {
  if (!(r.error <= abs_tol) || !std::isfinite(r.value))
    throw NumericalError(std::string(what) + ": quadrature did not converge (error bound " +
                         std::to_string(r.error) + ", tolerance " + std::to_string(abs_tol) +
                         ")");
}

}  // namespace relaynet
