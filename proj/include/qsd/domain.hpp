#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "qsd/errors.hpp"

namespace qsd {

enum class DomainKind {
    half_line,  // ]0, +inf[
    bounded,    // ]a, b[
};

/// Open interval the diffusion lives on before truncation.
struct Domain {
    double lower = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    DomainKind kind = DomainKind::half_line;

    bool contains(double x) const { return x > lower && x < upper; }

    static Domain half_line() { return Domain{0.0, std::numeric_limits<double>::infinity(), DomainKind::half_line}; }

    static Domain bounded(double a, double b) {
        if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
            throw ValidationError("bounded domain requires finite a < b");
        }
        return Domain{a, b, DomainKind::bounded};
    }
};

/// Closed-form killing interval with absorbing endpoints.
struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double length() const { return hi - lo; }
    double midpoint() const { return 0.5 * (lo + hi); }
    bool contains(double x) const { return x > lo && x < hi; }
};

/// Truncation of a domain: ]eps, 1/eps[ on the half-line, ]a+eps, b-eps[ on
/// a bounded interval. eps = 0 is allowed only in the bounded case.
inline Interval truncate(const Domain& d, double epsilon) {
    if (d.kind == DomainKind::half_line) {
        if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
            throw ValidationError("half-line truncation requires 0 < epsilon < 1, got " +
                                  std::to_string(epsilon));
        }
        return Interval{epsilon, 1.0 / epsilon};
    }
    if (!(epsilon >= 0.0) || !(d.lower + epsilon < d.upper - epsilon)) {
        throw ValidationError("bounded truncation requires 0 <= epsilon < (b-a)/2, got " +
                              std::to_string(epsilon));
    }
    return Interval{d.lower + epsilon, d.upper - epsilon};
}

}  // namespace qsd
