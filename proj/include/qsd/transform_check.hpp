#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qsd/catalog.hpp"
#include "qsd/errors.hpp"
#include "qsd/histogram.hpp"
#include "qsd/model.hpp"
#include "qsd/parallel.hpp"
#include "qsd/rng.hpp"
#include "qsd/sde.hpp"

namespace qsd {

struct TransformCheckOptions {
    StepConfig step{1e-4, true};
    std::size_t bins = 50;
    int workers = 1;
    // validation window in unit-diffusion coordinates
    double half_line_lo = 0.25;
    double half_line_hi = 4.0;
    double bounded_margin = 0.05;  // fraction of (b-a) trimmed at each end
};

struct TransformCheckReport {
    double tv = 0.0;
    double survival_x = 0.0;
    double survival_z = 0.0;
    std::uint64_t paths = 0;
    double horizon = 0.0;
};

/// Simulates the original SDE (in z) and the transformed unit diffusion (in
/// x) from matched starts with shared noise, both absorbed at a matched
/// window, and reports the TV distance between the surviving time-horizon
/// marginals mapped to x coordinates. Guards the catalog drifts against
/// transform mistakes; identity-transform models reproduce the same paths.
inline TransformCheckReport check_transform(const DiffusionModel& m, double horizon,
                                            std::uint64_t paths, std::uint64_t seed,
                                            const TransformCheckOptions& opts = {}) {
    if (!(horizon > 0.0)) throw ValidationError("check_transform requires a positive horizon");
    if (paths < 1000) throw ValidationError("check_transform requires at least 1000 paths");

    Interval ivx;
    if (m.domain.kind == DomainKind::half_line) {
        ivx = Interval{opts.half_line_lo, opts.half_line_hi};
    } else {
        const double L = m.domain.upper - m.domain.lower;
        ivx = Interval{m.domain.lower + opts.bounded_margin * L,
                       m.domain.upper - opts.bounded_margin * L};
    }
    const bool identity = m.transform.trivial || !m.orig_sigma;
    const Interval ivz = identity
                             ? ivx
                             : Interval{m.transform.inverse(ivx.lo), m.transform.inverse(ivx.hi)};
    const double x0 = ivx.midpoint();
    const double z0 = identity ? x0 : m.transform.inverse(x0);
    const auto steps = static_cast<std::uint64_t>(std::llround(horizon / opts.step.dt));
    const double dt = opts.step.dt;
    const double sqrt_dt = std::sqrt(dt);

    const int workers = std::max(1, opts.workers);
    std::vector<std::vector<std::uint64_t>> cx(static_cast<std::size_t>(workers),
                                               std::vector<std::uint64_t>(opts.bins, 0));
    std::vector<std::vector<std::uint64_t>> cz = cx;
    std::vector<std::uint64_t> ax(static_cast<std::size_t>(workers), 0), az = ax;
    const double w = ivx.length() / static_cast<double>(opts.bins);

    const std::size_t chunk =
        (static_cast<std::size_t>(paths) + static_cast<std::size_t>(workers) - 1) /
        static_cast<std::size_t>(workers);
    with_drift(m, [&](auto drift) {
        parallel_for(workers, static_cast<std::size_t>(workers), [&](std::size_t wb, std::size_t we) {
            for (std::size_t wk = wb; wk < we; ++wk) {
                const std::size_t begin = wk * chunk;
                const std::size_t end = std::min<std::size_t>(paths, begin + chunk);
                for (std::size_t p = begin; p < end; ++p) {
                    const auto stream = static_cast<std::uint32_t>(p);
                    double x = x0;
                    double z = z0;
                    bool x_dead = false;
                    bool z_dead = false;
                    for (std::uint64_t s = 0; s < steps && !(x_dead && z_dead); ++s) {
                        const rng::ParticleRng r(seed, stream, s);
                        const double xi = r.normal(0);
                        // both coordinates share the same bridge uniform
                        double u_shared = -1.0;
                        const auto u = [&] {
                            if (u_shared < 0.0) u_shared = r.uniform(1);
                            return u_shared;
                        };
                        if (!x_dead) {
                            const double xp = x + sqrt_dt * xi - drift(x) * dt;
                            if (xp <= ivx.lo || xp >= ivx.hi) {
                                x_dead = true;
                            } else {
                                const double e =
                                    (x - ivx.lo) + (xp - ivx.lo) <= (ivx.hi - x) + (ivx.hi - xp)
                                        ? ivx.lo
                                        : ivx.hi;
                                const double expo = 2.0 * std::abs(x - e) * std::abs(xp - e) / dt;
                                if (expo < 40.0 && u() < std::exp(-expo)) {
                                    x_dead = true;
                                } else {
                                    x = xp;
                                }
                            }
                        }
                        if (!z_dead) {
                            const double sig = identity ? 1.0 : m.orig_sigma(z);
                            const double b = identity ? -drift(z) : m.orig_drift(z);
                            const double zp = z + sig * sqrt_dt * xi + b * dt;
                            if (zp <= ivz.lo || zp >= ivz.hi) {
                                z_dead = true;
                            } else {
                                const double e =
                                    (z - ivz.lo) + (zp - ivz.lo) <= (ivz.hi - z) + (ivz.hi - zp)
                                        ? ivz.lo
                                        : ivz.hi;
                                const double expo =
                                    2.0 * std::abs(z - e) * std::abs(zp - e) / (sig * sig * dt);
                                if (expo < 40.0 && u() < std::exp(-expo)) {
                                    z_dead = true;
                                } else {
                                    z = zp;
                                }
                            }
                        }
                    }
                    if (!x_dead) {
                        auto idx = static_cast<std::size_t>((x - ivx.lo) / w);
                        if (idx >= opts.bins) idx = opts.bins - 1;
                        ++cx[wk][idx];
                        ++ax[wk];
                    }
                    if (!z_dead) {
                        const double xz = std::clamp(identity ? z : m.transform.forward(z), ivx.lo,
                                                     ivx.hi);
                        auto idx = static_cast<std::size_t>((xz - ivx.lo) / w);
                        if (idx >= opts.bins) idx = opts.bins - 1;
                        ++cz[wk][idx];
                        ++az[wk];
                    }
                }
            }
        });
    });

    std::uint64_t sx = 0, sz = 0;
    std::vector<double> mx(opts.bins, 0.0), mz(opts.bins, 0.0);
    for (int wk = 0; wk < workers; ++wk) {
        sx += ax[static_cast<std::size_t>(wk)];
        sz += az[static_cast<std::size_t>(wk)];
        for (std::size_t b = 0; b < opts.bins; ++b) {
            mx[b] += static_cast<double>(cx[static_cast<std::size_t>(wk)][b]);
            mz[b] += static_cast<double>(cz[static_cast<std::size_t>(wk)][b]);
        }
    }
    if (sx == 0 || sz == 0) {
        throw SurvivorStarvationError("check_transform: no surviving paths at the horizon");
    }
    for (auto& v : mx) v /= static_cast<double>(sx);
    for (auto& v : mz) v /= static_cast<double>(sz);
    const auto edges = uniform_edges(ivx.lo, ivx.hi, opts.bins);
    TransformCheckReport rep;
    rep.tv = distance_tv(make_histogram(edges, std::move(mx)), make_histogram(edges, std::move(mz)));
    rep.survival_x = static_cast<double>(sx) / static_cast<double>(paths);
    rep.survival_z = static_cast<double>(sz) / static_cast<double>(paths);
    rep.paths = paths;
    rep.horizon = horizon;
    return rep;
}

}  // namespace qsd
