#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "qsd/domain.hpp"
#include "qsd/errors.hpp"
#include "qsd/rng.hpp"

namespace qsd {

/// Time-stepping configuration shared by the kernels.
struct StepConfig {
    double dt = 1e-4;
    bool bridge_correction = true;
};

enum class BoundarySide { lower, upper };

struct KillOutcome {
    bool killed = false;
    double position = 0.0;        // valid when alive
    BoundarySide boundary = BoundarySide::lower;  // valid when killed

    static KillOutcome alive(double x) { return KillOutcome{false, x, BoundarySide::lower}; }
    static KillOutcome kill(BoundarySide side) { return KillOutcome{true, 0.0, side}; }
};

/// Probability that a Brownian bridge from x to xp (both inside, unit
/// diffusion, duration dt) touches the endpoint e.
inline double bridge_crossing_probability(double x, double xp, double e, double dt) {
    return std::exp(-2.0 * std::abs(x - e) * std::abs(xp - e) / dt);
}

/// Core of the killed Euler-Maruyama update with the drift value and the
/// gaussian already drawn; bridge_u() supplies the crossing-test uniform and
/// is only invoked when the crossing probability is visible.
template <class UniformFn>
KillOutcome killed_step_with(double x, double q, double xi, double dt, double sqrt_dt, bool bridge,
                             const Interval& iv, UniformFn&& bridge_u) {
    const double xp = x + sqrt_dt * xi - q * dt;
    if (xp <= iv.lo) return KillOutcome::kill(BoundarySide::lower);
    if (xp >= iv.hi) return KillOutcome::kill(BoundarySide::upper);
    if (bridge) {
        const bool lower_nearer = (x - iv.lo) + (xp - iv.lo) <= (iv.hi - x) + (iv.hi - xp);
        const double e = lower_nearer ? iv.lo : iv.hi;
        const double expo = 2.0 * std::abs(x - e) * std::abs(xp - e) / dt;
        if (expo < 40.0 && bridge_u() < std::exp(-expo)) {
            return KillOutcome::kill(lower_nearer ? BoundarySide::lower : BoundarySide::upper);
        }
    }
    return KillOutcome::alive(xp);
}

/// One Euler-Maruyama step of dX = dB - q(X) dt, absorbed at the interval
/// endpoints. With bridge_correction on, an interior-to-interior move can
/// still kill with the Brownian-bridge crossing probability of the nearer
/// endpoint; this removes the systematic undercount of boundary hits.
template <class DriftFn, class Rng>
KillOutcome killed_step(double x, DriftFn&& drift, const Interval& iv, const StepConfig& cfg,
                        const Rng& rng) {
    if (!iv.contains(x)) {
        throw DomainError("killed_step: x=" + std::to_string(x) + " not strictly inside (" +
                          std::to_string(iv.lo) + ", " + std::to_string(iv.hi) + ")");
    }
    const double q = drift(x);
    if (!std::isfinite(q)) {
        throw EvalError("killed_step: non-finite drift at x=" + std::to_string(x));
    }
    return killed_step_with(x, q, rng.normal(0), cfg.dt, std::sqrt(cfg.dt),
                            cfg.bridge_correction, iv, [&rng] { return rng.uniform(1); });
}

namespace detail {

/// Folds a real into [lo, hi] by repeated reflection at the endpoints.
inline double fold(double v, double lo, double hi) {
    const double span = hi - lo;
    double t = std::fmod(v - lo, 2.0 * span);
    if (t < 0.0) t += 2.0 * span;
    return lo + (t <= span ? t : 2.0 * span - t);
}

}  // namespace detail

constexpr double kReflectedUpper = 1.0 / 3.0;

/// One step of the dominating process dY = dW - q_bar dt reflected at 0 and
/// 1/3, discretized by folding the Euler proposal back into [0, 1/3].
inline double reflected_increment(double y, double q_bar, double dW, double dt) {
    return detail::fold(y + dW - q_bar * dt, 0.0, kReflectedUpper);
}

template <class Rng>
double reflected_step(double y, double q_bar, const StepConfig& cfg, const Rng& rng) {
    if (!(y >= 0.0 && y <= kReflectedUpper)) {
        throw DomainError("reflected_step: y=" + std::to_string(y) + " outside [0, 1/3]");
    }
    const double dW = std::sqrt(cfg.dt) * rng.normal(0);
    return reflected_increment(y, q_bar, dW, cfg.dt);
}

/// Sign regime of the coupled Brownian motion W driving Y: dW = -dB until X
/// first visits an outer third, then +dB while the last visited outer third
/// is the lower one and -dB while it is the upper one.
enum class CouplingRegime { initial, lower_third, upper_third };

/// Coupled pair (X, Y) on the unit interval with the invariant
/// 0 <= Y <= X <= 1 - Y <= 1.
struct CoupledState {
    double x = 0.5;
    double y = 0.0;
    CouplingRegime regime = CouplingRegime::initial;
    double q_bar = 0.0;  // sup |q| over (0,1)

    static CoupledState start(double x0, double q_bar) {
        return CoupledState{x0, std::min({x0, 1.0 - x0, kReflectedUpper}), CouplingRegime::initial,
                            q_bar};
    }
};

inline CouplingRegime next_regime(CouplingRegime current, double x) {
    if (x > 0.0 && x <= 1.0 / 3.0) return CouplingRegime::lower_third;
    if (x >= 2.0 / 3.0 && x < 1.0) return CouplingRegime::upper_third;
    return current;
}

/// Advances (X, Y) by one shared Brownian increment. X follows the killed
/// dynamics on (0,1); on a kill it jumps to jump_target(rng) and Y is left
/// unchanged for that step. Y follows the reflected dominating dynamics with
/// the sign-flipped increment of the regime the step ends in: a step that
/// crosses into an outer third is charged to the new regime, the discrete
/// counterpart of flipping W exactly at the crossing time. Charging it to the
/// old regime lets X overshoot the threshold by |xi| sqrt(dt) while Y sits at
/// the 1/3 cap, which breaks the coupling inequality beyond any O(sqrt(dt))
/// slack at the tails.
template <class DriftFn, class Rng, class JumpFn>
CoupledState coupled_step(const CoupledState& s, DriftFn&& drift, const StepConfig& cfg,
                          const Rng& rng, JumpFn&& jump_target) {
    const double dB = std::sqrt(cfg.dt) * rng.normal(0);
    const double q = drift(s.x);
    if (!std::isfinite(q)) {
        throw EvalError("coupled_step: non-finite drift at x=" + std::to_string(s.x));
    }
    const double xp = s.x + dB - q * cfg.dt;
    bool killed = xp <= 0.0 || xp >= 1.0;
    if (!killed && cfg.bridge_correction) {
        const double e = xp + s.x <= 1.0 ? 0.0 : 1.0;
        const double expo = 2.0 * std::abs(s.x - e) * std::abs(xp - e) / cfg.dt;
        killed = expo < 40.0 && rng.uniform(1) < std::exp(-expo);
    }
    CoupledState out = s;
    if (killed) {
        out.x = jump_target(rng);
        out.regime = next_regime(s.regime, out.x);
    } else {
        out.x = xp;
        out.regime = next_regime(s.regime, out.x);
        const double dW = out.regime == CouplingRegime::lower_third ? dB : -dB;
        // Skorokhod-style reflection at 0: the local time only pushes Y up to
        // the boundary, never past it. A fold at 0 can bounce Y a full
        // |xi| sqrt(dt) above the boundary and break the pathwise domination
        // that the construction exists to provide. The 1/3 end folds; a
        // downward fold can only widen both coupling gaps.
        const double yp = s.y + dW - s.q_bar * cfg.dt;
        out.y = yp < 0.0 ? 0.0 : (yp > kReflectedUpper ? detail::fold(yp, 0.0, kReflectedUpper) : yp);
    }
    return out;
}

/// Violation of the coupling inequality 0 <= y <= x <= 1-y <= 1 (0 if none).
inline double coupling_violation(const CoupledState& s) {
    return std::max({0.0, s.y - s.x, s.x - (1.0 - s.y)});
}

/// Drift of the affine rescale of (model, interval) onto the unit interval,
/// with time rescaled so the noise stays standard: u(t) = (X(L^2 t) - lo)/L.
template <class DriftFn>
struct RescaledDrift {
    DriftFn q;
    double lo;
    double len;
    double operator()(double u) const { return len * q(lo + len * u); }
};

template <class DriftFn>
RescaledDrift<std::decay_t<DriftFn>> rescale_to_unit(DriftFn&& q, const Interval& iv) {
    return RescaledDrift<std::decay_t<DriftFn>>{std::forward<DriftFn>(q), iv.lo, iv.length()};
}

}  // namespace qsd
