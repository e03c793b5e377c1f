#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include "qsd/domain.hpp"
#include "qsd/errors.hpp"
#include "qsd/quadrature.hpp"

namespace qsd {

enum class Direction { forward, inverse };

/// Monotone change of coordinates from the original process Z to the
/// unit-diffusion coordinate X. Identity when the model needs none.
struct Transform {
    std::function<double(double)> forward;  // z -> x
    std::function<double(double)> inverse;  // x -> z
    Domain original_domain;                 // domain of z
    bool trivial = true;

    static Transform identity(const Domain& d) {
        return Transform{[](double z) { return z; }, [](double x) { return x; }, d, true};
    }
};

/// Dispatch tag so hot loops can inline the catalog drifts.
enum class DriftKind { custom, zero, constant, logistic_feller, wright_fisher };

/// A killed diffusion dX = dB - q(X) dt on an open interval, together with
/// its derived quantities Q(x) = int_{x0}^x q and W = q^2 - q'.
struct DiffusionModel {
    std::string id = "custom";
    Domain domain;
    DriftKind kind = DriftKind::custom;
    std::map<std::string, double> params;

    std::function<double(double)> q;
    std::function<double(double)> q_prime;
    std::function<double(double)> Q_closed;  // may be empty; quadrature fallback

    Transform transform = Transform::identity(Domain::bounded(0.0, 1.0));
    double base_point = 1.0;  // 1 on the half-line, (a+b)/2 on bounded intervals

    // Original-coordinate SDE dZ = sigma(z) dB + b(z) dt, set for models
    // defined through a nontrivial transform. Used by check_transform.
    std::function<double(double)> orig_sigma;
    std::function<double(double)> orig_drift;

    // Q quadrature cache, keyed by evaluation point (custom models only).
    std::shared_ptr<std::map<double, double>> q_cache = std::make_shared<std::map<double, double>>();
    std::shared_ptr<std::mutex> q_cache_mutex = std::make_shared<std::mutex>();
};

inline double eval_drift(const DiffusionModel& m, double x) {
    if (!m.domain.contains(x)) {
        throw DomainError(m.id + ": drift evaluation at x=" + std::to_string(x) +
                          " outside the open domain");
    }
    const double v = m.q(x);
    if (!std::isfinite(v)) {
        throw EvalError(m.id + ": non-finite drift at x=" + std::to_string(x));
    }
    return v;
}

inline double eval_drift_prime(const DiffusionModel& m, double x) {
    if (!m.domain.contains(x)) {
        throw DomainError(m.id + ": drift derivative at x=" + std::to_string(x) +
                          " outside the open domain");
    }
    const double v = m.q_prime(x);
    if (!std::isfinite(v)) {
        throw EvalError(m.id + ": non-finite drift derivative at x=" + std::to_string(x));
    }
    return v;
}

/// Q(x) = int_{base}^{x} q. Closed form when the model provides one,
/// otherwise adaptive quadrature anchored at previously computed points.
inline double eval_Q(const DiffusionModel& m, double x) {
    const bool on_closure = m.domain.kind == DomainKind::bounded
                                ? (x >= m.domain.lower && x <= m.domain.upper)
                                : m.domain.contains(x);
    if (!on_closure) {
        throw DomainError(m.id + ": Q evaluation at x=" + std::to_string(x) + " outside the domain");
    }
    double v;
    if (m.Q_closed) {
        v = m.Q_closed(x);
    } else {
        std::lock_guard<std::mutex> lock(*m.q_cache_mutex);
        auto& cache = *m.q_cache;
        if (const auto hit = cache.find(x); hit != cache.end()) return hit->second;
        // integrate from the nearest known anchor
        double anchor_x = m.base_point;
        double anchor_q = 0.0;
        if (!cache.empty()) {
            auto it = cache.lower_bound(x);
            if (it == cache.end() || (it != cache.begin() && x - std::prev(it)->first < it->first - x)) {
                --it;
            }
            if (std::abs(it->first - x) < std::abs(anchor_x - x)) {
                anchor_x = it->first;
                anchor_q = it->second;
            }
        }
        v = anchor_q + integrate([&m](double y) { return m.q(y); }, anchor_x, x);
        cache.emplace(x, v);
    }
    if (!std::isfinite(v)) {
        throw EvalError(m.id + ": non-finite Q at x=" + std::to_string(x));
    }
    return v;
}

/// W(x) = q(x)^2 - q'(x).
inline double eval_W(const DiffusionModel& m, double x) {
    const double q = eval_drift(m, x);
    const double qp = eval_drift_prime(m, x);
    return q * q - qp;
}

inline double transform_point(const DiffusionModel& m, double z, Direction dir) {
    if (dir == Direction::forward) {
        if (!m.transform.original_domain.contains(z)) {
            throw DomainError(m.id + ": forward transform input z=" + std::to_string(z) +
                              " outside the original domain");
        }
        return m.transform.forward(z);
    }
    if (!m.domain.contains(z)) {
        throw DomainError(m.id + ": inverse transform input x=" + std::to_string(z) +
                          " outside the domain");
    }
    return m.transform.inverse(z);
}

}  // namespace qsd
