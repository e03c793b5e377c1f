#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/model.hpp"

namespace qsd {

// Inlinable drift functors for the catalog models. The simulation engines
// dispatch on DriftKind so the per-step drift call never goes through
// std::function.

struct ZeroDrift {
    double operator()(double) const { return 0.0; }
};

struct ConstantDrift {
    double c;
    double operator()(double) const { return c; }
};

/// Unit-diffusion form of dZ = sqrt(Z) dB + (rZ - cZ^2) dt under x = 2 sqrt(z).
struct LogisticFellerDrift {
    double r;
    double c;
    double operator()(double x) const { return 1.0 / (2.0 * x) - r * x / 2.0 + c * x * x * x / 8.0; }
};

/// Unit-diffusion form of dZ = sqrt(Z(1-Z)) dB - Z dt under x = arccos(1 - 2z).
/// (2 - cos x)/(2 sin x) written with the half-angle tangent, one libm call.
struct WrightFisherDrift {
    double operator()(double x) const {
        const double t = std::tan(0.5 * x);
        return (1.0 + 3.0 * t * t) / (4.0 * t);
    }
};

inline const std::vector<std::string>& catalog_ids() {
    static const std::vector<std::string> ids = {"brownian", "constant-drift", "logistic-feller",
                                                 "wright-fisher"};
    return ids;
}

namespace detail {

inline double take_param(std::map<std::string, double> params, const std::string& key, double def,
                         std::map<std::string, double>& rest) {
    rest = std::move(params);
    const auto it = rest.find(key);
    if (it == rest.end()) return def;
    const double v = it->second;
    rest.erase(it);
    return v;
}

inline void reject_unknown(const std::string& id, const std::map<std::string, double>& rest) {
    if (!rest.empty()) {
        throw ValidationError("model '" + id + "' does not accept parameter '" +
                              rest.begin()->first + "'");
    }
}

}  // namespace detail

/// Builds a catalog model. Known ids: brownian [a, b], constant-drift
/// [drift, a, b], logistic-feller [r, c], wright-fisher [].
inline DiffusionModel make_model(const std::string& id,
                                 std::map<std::string, double> params = {}) {
    DiffusionModel m;
    m.id = id;
    if (id == "brownian") {
        std::map<std::string, double> rest;
        const double a = detail::take_param(params, "a", 0.0, rest);
        params = rest;
        const double b = detail::take_param(params, "b", 1.0, rest);
        detail::reject_unknown(id, rest);
        m.domain = Domain::bounded(a, b);
        m.kind = DriftKind::zero;
        m.params = {{"a", a}, {"b", b}};
        m.q = [](double) { return 0.0; };
        m.q_prime = [](double) { return 0.0; };
        m.Q_closed = [](double) { return 0.0; };
        m.base_point = 0.5 * (a + b);
        m.transform = Transform::identity(m.domain);
    } else if (id == "constant-drift") {
        std::map<std::string, double> rest;
        const double c = detail::take_param(params, "drift", 1.0, rest);
        params = rest;
        const double a = detail::take_param(params, "a", 0.0, rest);
        params = rest;
        const double b = detail::take_param(params, "b", 1.0, rest);
        detail::reject_unknown(id, rest);
        if (!std::isfinite(c)) throw ValidationError("constant-drift: drift must be finite");
        m.domain = Domain::bounded(a, b);
        m.kind = DriftKind::constant;
        m.params = {{"drift", c}, {"a", a}, {"b", b}};
        m.q = [c](double) { return c; };
        m.q_prime = [](double) { return 0.0; };
        const double x0 = 0.5 * (a + b);
        m.Q_closed = [c, x0](double x) { return c * (x - x0); };
        m.base_point = x0;
        m.transform = Transform::identity(m.domain);
    } else if (id == "logistic-feller") {
        std::map<std::string, double> rest;
        const double r = detail::take_param(params, "r", 1.0, rest);
        params = rest;
        const double c = detail::take_param(params, "c", 1.0, rest);
        detail::reject_unknown(id, rest);
        if (!(r > 0.0) || !(c > 0.0)) {
            throw ValidationError("logistic-feller: parameters r and c must be positive");
        }
        m.domain = Domain::half_line();
        m.kind = DriftKind::logistic_feller;
        m.params = {{"r", r}, {"c", c}};
        m.q = LogisticFellerDrift{r, c};
        m.q_prime = [r, c](double x) { return -1.0 / (2.0 * x * x) - r / 2.0 + 3.0 * c * x * x / 8.0; };
        m.Q_closed = [r, c](double x) {
            return 0.5 * std::log(x) - r * (x * x - 1.0) / 4.0 + c * (x * x * x * x - 1.0) / 32.0;
        };
        m.base_point = 1.0;
        m.transform = Transform{[](double z) { return 2.0 * std::sqrt(z); },
                                [](double x) { return x * x / 4.0; }, Domain::half_line(), false};
        m.orig_sigma = [](double z) { return std::sqrt(z); };
        m.orig_drift = [r, c](double z) { return r * z - c * z * z; };
    } else if (id == "wright-fisher") {
        detail::reject_unknown(id, params);
        m.domain = Domain::bounded(0.0, std::numbers::pi);
        m.kind = DriftKind::wright_fisher;
        m.q = WrightFisherDrift{};
        m.q_prime = [](double x) {
            const double s = std::sin(x);
            return (1.0 - 2.0 * std::cos(x)) / (2.0 * s * s);
        };
        m.Q_closed = [](double x) {
            return std::log(std::tan(x / 2.0)) - 0.5 * std::log(std::sin(x));
        };
        m.base_point = std::numbers::pi / 2.0;
        m.transform = Transform{[](double z) { return std::acos(1.0 - 2.0 * z); },
                                [](double x) { return (1.0 - std::cos(x)) / 2.0; },
                                Domain::bounded(0.0, 1.0), false};
        m.orig_sigma = [](double z) { return std::sqrt(z * (1.0 - z)); };
        m.orig_drift = [](double z) { return -z; };
    } else {
        std::string known;
        for (const auto& k : catalog_ids()) known += (known.empty() ? "" : ", ") + k;
        throw ValidationError("unknown model id '" + id + "'; catalog: " + known);
    }
    return m;
}

/// Calls fn with an inlinable drift functor matching the model.
template <class Fn>
decltype(auto) with_drift(const DiffusionModel& m, Fn&& fn) {
    switch (m.kind) {
        case DriftKind::zero:
            return fn(ZeroDrift{});
        case DriftKind::constant:
            return fn(ConstantDrift{m.params.at("drift")});
        case DriftKind::logistic_feller:
            return fn(LogisticFellerDrift{m.params.at("r"), m.params.at("c")});
        case DriftKind::wright_fisher:
            return fn(WrightFisherDrift{});
        case DriftKind::custom:
            break;
    }
    return fn(m.q);
}

}  // namespace qsd
