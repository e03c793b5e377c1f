#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/model.hpp"
#include "qsd/quadrature.hpp"

namespace qsd {

enum class Verdict { pass, fail, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

inline Verdict verdict_and(Verdict a, Verdict b) {
    if (a == Verdict::fail || b == Verdict::fail) return Verdict::fail;
    if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
    return Verdict::pass;
}

inline Verdict verdict_or(Verdict a, Verdict b) {
    if (a == Verdict::pass || b == Verdict::pass) return Verdict::pass;
    if (a == Verdict::inconclusive || b == Verdict::inconclusive) return Verdict::inconclusive;
    return Verdict::fail;
}

struct HypothesisEntry {
    std::string name;
    Verdict verdict = Verdict::inconclusive;
    std::map<std::string, double> witnesses;
    std::string grid;
};

struct HypothesisReport {
    std::string model_id;
    std::vector<HypothesisEntry> entries;

    const HypothesisEntry& entry(const std::string& name) const {
        for (const auto& e : entries) {
            if (e.name == name) return e;
        }
        throw ValidationError("no hypothesis entry named " + name);
    }
};

struct HypoOptions {
    int levels = 48;            // geometric refinement levels per endpoint
    int points_per_level = 32;  // W samples per level for the inf estimate
    double tail_ratio = 0.95;   // segment ratio accepted as geometric decay
    double tail_rel_tol = 1e-6; // projected tail mass relative to the integral
};

namespace detail {

/// Convergence probe for an improper integral split into geometric segments
/// ordered toward the bad endpoint. S[k] is the integral over segment k.
struct TailProbe {
    double partial = 0.0;
    double last_segment = 0.0;
    int levels_used = 0;
    Verdict verdict = Verdict::inconclusive;
};

template <class SegFn>
TailProbe probe_tail(SegFn&& segment_integral, int levels, double tail_ratio, double rel_tol) {
    TailProbe out;
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(levels));
    int flat_or_growing = 0;
    int decaying = 0;
    for (int k = 0; k < levels; ++k) {
        const double sk = segment_integral(k);
        out.levels_used = k + 1;
        out.last_segment = sk;
        out.partial += sk;
        s.push_back(sk);
        if (!std::isfinite(out.partial)) {
            out.verdict = Verdict::fail;
            return out;
        }
        if (sk == 0.0) {  // tail underflowed to exactly zero: converged
            out.verdict = Verdict::pass;
            return out;
        }
        if (k >= 1 && s[static_cast<std::size_t>(k) - 1] > 0.0) {
            const double r = sk / s[static_cast<std::size_t>(k) - 1];
            if (r >= 0.999) {
                ++flat_or_growing;
                decaying = 0;
            } else if (r <= tail_ratio) {
                ++decaying;
                flat_or_growing = 0;
            } else {
                flat_or_growing = 0;
                decaying = 0;
            }
            if (flat_or_growing >= 4) {  // log-divergent or worse
                out.verdict = Verdict::fail;
                return out;
            }
            if (decaying >= 4) {
                const double projected = sk * r / (1.0 - r);
                if (projected <= rel_tol * (out.partial + projected)) {
                    out.verdict = Verdict::pass;
                    return out;
                }
            }
        }
    }
    out.verdict = Verdict::inconclusive;
    return out;
}

/// Level-wise minima of W on geometric windows toward an endpoint; decides
/// whether W stays bounded below there.
template <class WFn>
Verdict probe_lower_bound(WFn&& W, const std::vector<std::pair<double, double>>& windows,
                          int points, double& global_min) {
    std::vector<double> mins;
    for (const auto& [a, b] : windows) {
        double m = std::numeric_limits<double>::infinity();
        for (int i = 0; i < points; ++i) {
            const double x = a + (b - a) * (static_cast<double>(i) + 0.5) / points;
            m = std::min(m, W(x));
        }
        if (!std::isfinite(m) && m < 0) return Verdict::fail;
        mins.push_back(m);
        global_min = std::min(global_min, m);
    }
    // windows are ordered toward the endpoint: new record lows that keep
    // deepening signal divergence to -infinity
    int deepening = 0;
    double record = mins.empty() ? 0.0 : mins.front();
    double last_drop = 0.0;
    for (std::size_t k = 1; k < mins.size(); ++k) {
        if (mins[k] < record) {
            const double drop = record - mins[k];
            if (drop > std::max(1.0, std::abs(record)) * 0.5 && drop >= last_drop) {
                ++deepening;
            } else {
                deepening = 0;
            }
            last_drop = drop;
            record = mins[k];
        } else {
            deepening = 0;
            last_drop = 0.0;
        }
    }
    if (deepening >= 3) return Verdict::fail;
    // stabilized or increasing toward the endpoint
    const std::size_t n = mins.size();
    if (n >= 3 && (mins[n - 1] >= mins[n - 2] || std::abs(mins[n - 1] - mins[n - 2]) <=
                                                     1e-6 * (1.0 + std::abs(mins[n - 1])))) {
        return Verdict::pass;
    }
    return Verdict::inconclusive;
}

}  // namespace detail

/// Numerical check of the tightness hypotheses: (H1)(H2)(H3) on the
/// half-line, (HH1)(HH2)(HH3) on a bounded interval. Certifies on a
/// geometrically refined grid and reports "inconclusive" when refinement has
/// not stabilized.
inline HypothesisReport check_hypotheses(const DiffusionModel& m, const HypoOptions& opts = {}) {
    HypothesisReport rep;
    rep.model_id = m.id;
    const auto W = [&m](double x) {
        const double q = m.q(x);
        return q * q - m.q_prime(x);
    };
    const auto Q = [&m](double x) { return eval_Q(m, x); };
    const std::string grid_desc = std::to_string(opts.levels) + " geometric levels, " +
                                  std::to_string(opts.points_per_level) + " points each";

    if (m.domain.kind == DomainKind::half_line) {
        // ---- H1: W bounded below and W -> +inf at +inf
        double inf_w = std::numeric_limits<double>::infinity();
        std::vector<std::pair<double, double>> toward_zero;
        for (int k = 0; k < opts.levels; ++k) {
            toward_zero.emplace_back(std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k));
        }
        const Verdict below = detail::probe_lower_bound(W, toward_zero, opts.points_per_level, inf_w);
        std::vector<std::pair<double, double>> toward_inf;
        for (int k = 0; k < opts.levels; ++k) {
            toward_inf.emplace_back(std::ldexp(1.0, k), std::ldexp(1.0, k + 1));
        }
        double unused = std::numeric_limits<double>::infinity();
        const Verdict below_inf =
            detail::probe_lower_bound(W, toward_inf, opts.points_per_level, unused);
        inf_w = std::min(inf_w, unused);
        // divergence of W at +inf: sampled at 2^k
        std::vector<double> tail_w;
        for (int k = 0; k <= 20; ++k) tail_w.push_back(W(std::ldexp(1.0, k)));
        bool increasing = true;
        for (std::size_t i = tail_w.size() - 5; i + 1 < tail_w.size(); ++i) {
            increasing = increasing && tail_w[i + 1] > tail_w[i];
        }
        const Verdict diverges = increasing && tail_w.back() > 100.0 * (1.0 + std::abs(inf_w))
                                     ? Verdict::pass
                                     : Verdict::inconclusive;
        const double C = std::max(0.0, -inf_w);
        HypothesisEntry h1{"H1", verdict_and(verdict_and(below, below_inf), diverges), {}, grid_desc};
        h1.witnesses["inf_W"] = inf_w;
        h1.witnesses["C"] = C;
        h1.witnesses["W_tail_2e3"] = tail_w[11];
        h1.witnesses["W_tail_1e6"] = tail_w[20];
        rep.entries.push_back(std::move(h1));

        // ---- common tail integral of (H2)/(H3): int_1^inf e^{-2Q}
        const auto tail = detail::probe_tail(
            [&](int k) {
                return integrate([&](double x) { return std::exp(-2.0 * Q(x)); },
                                 std::ldexp(1.0, k), std::ldexp(1.0, k + 1), 1e-10);
            },
            opts.levels, opts.tail_ratio, opts.tail_rel_tol);

        // ---- H2: int_0^1 1/(W+C+1) dmu
        const auto h2core = detail::probe_tail(
            [&](int k) {
                return integrate(
                    [&](double x) {
                        return std::exp(-2.0 * Q(x)) / std::max(W(x) + C + 1.0, 1e-12);
                    },
                    std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k), 1e-10);
            },
            opts.levels, opts.tail_ratio, opts.tail_rel_tol);
        HypothesisEntry h2{"H2", verdict_and(tail.verdict, h2core.verdict), {}, grid_desc};
        h2.witnesses["integral_tail_e2Q"] = tail.partial;
        h2.witnesses["integral_weighted_mu"] = h2core.partial;
        h2.witnesses["last_segment"] = h2core.last_segment;
        rep.entries.push_back(std::move(h2));

        // ---- H3: int_0^1 x e^{-Q}
        const auto h3core = detail::probe_tail(
            [&](int k) {
                return integrate([&](double x) { return x * std::exp(-Q(x)); },
                                 std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k), 1e-10);
            },
            opts.levels, opts.tail_ratio, opts.tail_rel_tol);
        HypothesisEntry h3{"H3", verdict_and(tail.verdict, h3core.verdict), {}, grid_desc};
        h3.witnesses["integral_tail_e2Q"] = tail.partial;
        h3.witnesses["integral_x_emQ"] = h3core.partial;
        h3.witnesses["last_segment"] = h3core.last_segment;
        rep.entries.push_back(std::move(h3));
        return rep;
    }

    // ---- bounded interval: HH1, HH2, HH3
    const double a = m.domain.lower;
    const double b = m.domain.upper;
    const double half = 0.5 * (b - a);
    double inf_w = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> toward_a, toward_b;
    for (int k = 0; k < opts.levels; ++k) {
        toward_a.emplace_back(a + half * std::ldexp(1.0, -k - 1), a + half * std::ldexp(1.0, -k));
        toward_b.emplace_back(b - half * std::ldexp(1.0, -k), b - half * std::ldexp(1.0, -k - 1));
    }
    const Verdict near_a = detail::probe_lower_bound(W, toward_a, opts.points_per_level, inf_w);
    const Verdict near_b = detail::probe_lower_bound(W, toward_b, opts.points_per_level, inf_w);
    const double C = std::max(0.0, -inf_w);
    HypothesisEntry hh1{"HH1", verdict_and(near_a, near_b), {}, grid_desc};
    hh1.witnesses["inf_W"] = inf_w;
    hh1.witnesses["C"] = C;
    rep.entries.push_back(std::move(hh1));

    const auto endpoint_entry = [&](const std::string& name, bool at_a) {
        const auto primary = detail::probe_tail(
            [&](int k) {
                const double u0 = half * std::ldexp(1.0, -k - 1);
                const double u1 = half * std::ldexp(1.0, -k);
                const double lo = at_a ? a + u0 : b - u1;
                const double hi = at_a ? a + u1 : b - u0;
                return integrate(
                    [&](double x) { return (at_a ? x - a : b - x) * std::exp(-Q(x)); }, lo, hi,
                    1e-10);
            },
            opts.levels, opts.tail_ratio, opts.tail_rel_tol);
        const auto alternative = detail::probe_tail(
            [&](int k) {
                const double u0 = half * std::ldexp(1.0, -k - 1);
                const double u1 = half * std::ldexp(1.0, -k);
                const double lo = at_a ? a + u0 : b - u1;
                const double hi = at_a ? a + u1 : b - u0;
                return integrate(
                    [&](double x) {
                        return std::exp(-2.0 * Q(x)) / std::max(W(x) + C + 1.0, 1e-12);
                    },
                    lo, hi, 1e-10);
            },
            opts.levels, opts.tail_ratio, opts.tail_rel_tol);
        HypothesisEntry e{name, verdict_or(primary.verdict, alternative.verdict), {}, grid_desc};
        e.witnesses["integral_distance_emQ"] = primary.partial;
        e.witnesses["integral_weighted_mu"] = alternative.partial;
        e.witnesses["last_segment"] = primary.last_segment;
        return e;
    };
    rep.entries.push_back(endpoint_entry("HH2", true));
    rep.entries.push_back(endpoint_entry("HH3", false));
    return rep;
}

}  // namespace qsd
