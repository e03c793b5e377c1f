#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qsd/domain.hpp"
#include "qsd/errors.hpp"
#include "qsd/fv.hpp"
#include "qsd/histogram.hpp"
#include "qsd/parallel.hpp"
#include "qsd/rng.hpp"
#include "qsd/sde.hpp"

namespace qsd {

struct McConfig {
    StepConfig step;
    std::size_t bins = 100;
    std::uint64_t seed = 1;
    int workers = 1;
    std::uint64_t min_survivors = 100;
};

struct McResult {
    Histogram histogram;  // mass-1 law of the survivors at the horizon
    double survival = 0.0;
    double survival_std_error = 0.0;
    std::uint64_t survivors = 0;
    std::uint64_t paths = 0;
};

/// Brute-force estimate of P(X_T in . | tau > T): M independent killed paths,
/// histogram of the survivors. Deterministic for a fixed seed regardless of
/// the worker count (per-path counter streams, integer bin counts).
template <class DriftFn>
McResult conditioned_law_mc(DriftFn&& drift, const Interval& iv, const InitialSampler& init,
                            double T, std::uint64_t paths, const McConfig& cfg) {
    if (!(T > 0.0)) throw ValidationError("conditioned_law_mc requires T > 0");
    if (paths < 1000) throw ValidationError("conditioned_law_mc requires at least 1000 paths");
    const auto steps = static_cast<std::uint64_t>(std::llround(T / cfg.step.dt));

    const int workers = std::max(1, cfg.workers);
    std::vector<std::vector<std::uint64_t>> counts(
        static_cast<std::size_t>(workers), std::vector<std::uint64_t>(cfg.bins, 0));
    std::vector<std::uint64_t> alive(static_cast<std::size_t>(workers), 0);
    const double w = iv.length() / static_cast<double>(cfg.bins);

    const double dt = cfg.step.dt;
    const double sqrt_dt = std::sqrt(dt);
    const bool bridge = cfg.step.bridge_correction;
    const std::size_t chunk =
        (static_cast<std::size_t>(paths) + static_cast<std::size_t>(workers) - 1) /
        static_cast<std::size_t>(workers);
    parallel_for(workers, static_cast<std::size_t>(workers), [&](std::size_t wb, std::size_t we) {
        for (std::size_t wk = wb; wk < we; ++wk) {
            const std::size_t begin = wk * chunk;
            const std::size_t end = std::min<std::size_t>(paths, begin + chunk);
            auto& local = counts[wk];
            const auto start_of = [&](std::size_t p) {
                const double x = init(rng::u01(
                    rng::philox_block(cfg.seed, static_cast<std::uint32_t>(p), rng::kStepInit, 0)
                        .a));
                if (!iv.contains(x)) {
                    throw ValidationError("initial sampler produced " + std::to_string(x) +
                                          " outside the killing interval");
                }
                return x;
            };
            const auto record = [&](double x) {
                auto idx = static_cast<std::size_t>((x - iv.lo) / w);
                if (idx >= cfg.bins) idx = cfg.bins - 1;
                ++local[idx];
                ++alive[wk];
            };
            // four paths run interleaved, sharing the Philox blocks of their
            // pairs; stragglers at chunk edges go one by one with the same
            // per-path draws
            std::size_t p = begin;
            while (p < end) {
                if (p % 4 == 0 && p + 4 <= end) {
                    const std::size_t g = p / 4;
                    double x[4];
                    bool live[4];
                    for (int l = 0; l < 4; ++l) {
                        x[l] = start_of(p + l);
                        live[l] = true;
                    }
                    int live_count = 4;
                    for (std::uint64_t s = 0; s < steps && live_count > 0; ++s) {
                        rng::Block blk[2];
                        if (live[0] || live[1]) {
                            blk[0] = rng::philox_block(cfg.seed,
                                                       static_cast<std::uint32_t>(2 * g), s, 0);
                        }
                        if (live[2] || live[3]) {
                            blk[1] = rng::philox_block(
                                cfg.seed, static_cast<std::uint32_t>(2 * g + 1), s, 0);
                        }
                        for (int l = 0; l < 4; ++l) {
                            if (!live[l]) continue;
                            const std::uint64_t bits = (l & 1) ? blk[l >> 1].b : blk[l >> 1].a;
                            const double q = drift(x[l]);
                            if (!std::isfinite(q)) {
                                throw EvalError("mc: non-finite drift at x=" +
                                                std::to_string(x[l]));
                            }
                            const KillOutcome out = killed_step_with(
                                x[l], q, rng::normal_icdf(rng::u01(bits)), dt, sqrt_dt, bridge, iv,
                                [&] {
                                    return rng::u01(
                                        rng::philox_block(cfg.seed,
                                                          static_cast<std::uint32_t>(p + l), s, 1)
                                            .b);
                                });
                            if (out.killed) {
                                live[l] = false;
                                --live_count;
                            } else {
                                x[l] = out.position;
                            }
                        }
                    }
                    for (int l = 0; l < 4; ++l) {
                        if (live[l]) record(x[l]);
                    }
                    p += 4;
                } else {
                    double x = start_of(p);
                    bool dead = false;
                    for (std::uint64_t s = 0; s < steps; ++s) {
                        const rng::ParticleRng r(cfg.seed, static_cast<std::uint32_t>(p), s);
                        const KillOutcome out = killed_step(x, drift, iv, cfg.step, r);
                        if (out.killed) {
                            dead = true;
                            break;
                        }
                        x = out.position;
                    }
                    if (!dead) record(x);
                    ++p;
                }
            }
        }
    });

    std::vector<std::uint64_t> total(cfg.bins, 0);
    std::uint64_t survivors = 0;
    for (int wk = 0; wk < workers; ++wk) {
        survivors += alive[static_cast<std::size_t>(wk)];
        for (std::size_t b = 0; b < cfg.bins; ++b) total[b] += counts[static_cast<std::size_t>(wk)][b];
    }
    if (survivors < cfg.min_survivors) {
        throw SurvivorStarvationError("only " + std::to_string(survivors) + " of " +
                                      std::to_string(paths) +
                                      " paths survived to T; conditioning too deep for this M");
    }

    std::vector<double> masses(cfg.bins);
    for (std::size_t b = 0; b < cfg.bins; ++b) {
        masses[b] = static_cast<double>(total[b]) / static_cast<double>(survivors);
    }
    McResult res;
    res.histogram = make_histogram(uniform_edges(iv.lo, iv.hi, cfg.bins), std::move(masses));
    res.survivors = survivors;
    res.paths = paths;
    res.survival = static_cast<double>(survivors) / static_cast<double>(paths);
    res.survival_std_error =
        std::sqrt(res.survival * (1.0 - res.survival) / static_cast<double>(paths));
    return res;
}

}  // namespace qsd
