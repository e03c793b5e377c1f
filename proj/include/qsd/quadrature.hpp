#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <string>

#include "qsd/errors.hpp"

namespace qsd {

/// Adaptive Gauss-Kronrod (G7,K15) integral of f over [a, b].
/// Throws EvalError when the result is not finite.
template <class Fn>
double integrate(Fn&& f, double a, double b, double rel_tol = 1e-12, int max_depth = 18) {
    if (a == b) return 0.0;
    double err = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, max_depth, rel_tol, &err);
    if (!std::isfinite(value)) {
        throw EvalError("quadrature produced a non-finite value on [" + std::to_string(a) + ", " +
                        std::to_string(b) + "]");
    }
    return value;
}

}  // namespace qsd
