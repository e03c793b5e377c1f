#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsd/domain.hpp"
#include "qsd/errors.hpp"
#include "qsd/histogram.hpp"
#include "qsd/parallel.hpp"
#include "qsd/rng.hpp"
#include "qsd/sde.hpp"

namespace qsd {

struct JumpEvent {
    double time;
    std::uint32_t killed_index;
    BoundarySide boundary;
    std::uint32_t target_index;
};

/// State of the N-particle Fleming-Viot system. Positions are strictly
/// inside the killing interval after every completed step.
struct ParticleSystem {
    std::vector<double> positions;
    Interval kill_interval;
    double clock = 0.0;
    std::uint64_t step_index = 0;
    std::uint64_t jump_count = 0;
    std::uint64_t seed = 0;
    std::optional<std::vector<JumpEvent>> jump_log;

    std::size_t size() const { return positions.size(); }

    // window scratch, kept here to avoid reallocation
    std::vector<double> window_pos_;
    std::vector<std::uint32_t> first_kill_;
    std::vector<std::uint8_t> kill_side_;
};

/// Initial condition expressed as a quantile map u in (0,1) -> position.
using InitialSampler = std::function<double(double)>;

inline InitialSampler uniform_init(const Interval& iv) {
    return [iv](double u) { return iv.lo + u * iv.length(); };
}

inline InitialSampler point_init(double x) {
    return [x](double) { return x; };
}

inline InitialSampler samples_init(std::vector<double> samples) {
    if (samples.empty()) throw ValidationError("sample-based initial condition is empty");
    return [s = std::move(samples)](double u) {
        auto idx = static_cast<std::size_t>(u * static_cast<double>(s.size()));
        if (idx >= s.size()) idx = s.size() - 1;
        return s[idx];
    };
}

inline ParticleSystem init_particle_system(std::size_t n, const Interval& iv, std::uint64_t seed,
                                           const InitialSampler& init, bool keep_jump_log = false) {
    if (n < 2) throw ValidationError("N must be >= 2");
    if (n >= rng::kStreamMax) throw ValidationError("N too large for the stream layout");
    ParticleSystem sys;
    sys.kill_interval = iv;
    sys.seed = seed;
    sys.positions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng::u01(rng::philox_block(seed, rng::kStreamInit, i, 0).a);
        const double x = init(u);
        if (!iv.contains(x)) {
            throw ValidationError("initial position " + std::to_string(x) +
                                  " not strictly inside the killing interval");
        }
        sys.positions[i] = x;
    }
    if (keep_jump_log) sys.jump_log.emplace();
    return sys;
}

namespace detail {

/// Advances the system by `window` steps. Particles are simulated
/// speculatively in parallel over the whole window (first kill recorded);
/// kills are then resolved serially sub-step by sub-step, in ascending
/// particle index, each killed particle adopting the post-step position of a
/// uniformly drawn particle among the others alive at resolution time.
/// Because every draw is a pure function of (seed, particle, step), the
/// resurrected particle replays the exact trajectory a step-by-step run
/// would have produced, so the window size cannot change any result.
template <class DriftFn>
void fv_advance_window(ParticleSystem& sys, DriftFn&& drift, StepConfig cfg, int workers,
                       std::uint32_t window) {
    const std::size_t n = sys.size();
    const Interval iv = sys.kill_interval;
    const std::uint64_t step0 = sys.step_index;
    sys.window_pos_.resize(static_cast<std::size_t>(window) * n);
    sys.first_kill_.assign(n, window);
    sys.kill_side_.resize(n);
    double* const pos = sys.window_pos_.data();
    std::uint32_t* const first_kill = sys.first_kill_.data();
    std::uint8_t* const kill_side = sys.kill_side_.data();

    const double dt = cfg.dt;
    const double sqrt_dt = std::sqrt(cfg.dt);
    const bool bridge = cfg.bridge_correction;
    const std::uint64_t seed = sys.seed;

    const auto simulate = [&](std::size_t i, std::uint32_t from, double x) {
        for (std::uint32_t t = from; t < window; ++t) {
            const KillOutcome out = killed_step(
                x, drift, iv, cfg, rng::ParticleRng(seed, static_cast<std::uint32_t>(i), step0 + t));
            if (out.killed) {
                first_kill[i] = t;
                kill_side[i] = out.boundary == BoundarySide::lower ? 1 : 2;
                return;
            }
            x = out.position;
            pos[static_cast<std::size_t>(t) * n + i] = x;
        }
        first_kill[i] = window;
    };

    // Groups of four particles share the two Philox blocks of their pairs and
    // interleave their update chains; draw values are identical to what
    // `simulate` above would produce, lane by lane.
    const std::size_t groups = (n + 3) / 4;
    parallel_for(workers, groups, [&](std::size_t gb, std::size_t ge) {
        for (std::size_t g = gb; g < ge; ++g) {
            const std::size_t base = 4 * g;
            const auto lanes = static_cast<std::uint32_t>(std::min<std::size_t>(4, n - base));
            double x[4];
            bool alive[4] = {false, false, false, false};
            for (std::uint32_t l = 0; l < lanes; ++l) {
                x[l] = sys.positions[base + l];
                alive[l] = true;
            }
            std::uint32_t alive_count = lanes;
            for (std::uint32_t t = 0; t < window && alive_count > 0; ++t) {
                const std::uint64_t step = step0 + t;
                rng::Block blk[2];
                if (alive[0] || alive[1]) {
                    blk[0] = rng::philox_block(seed, static_cast<std::uint32_t>(2 * g), step, 0);
                }
                if (alive[2] || alive[3]) {
                    blk[1] = rng::philox_block(seed, static_cast<std::uint32_t>(2 * g + 1), step, 0);
                }
                for (std::uint32_t l = 0; l < lanes; ++l) {
                    if (!alive[l]) continue;
                    const std::uint64_t bits = (l & 1u) ? blk[l >> 1].b : blk[l >> 1].a;
                    const double xi = rng::normal_icdf(rng::u01(bits));
                    const std::size_t i = base + l;
                    const double q = drift(x[l]);
                    if (!std::isfinite(q)) {
                        throw EvalError("fv: non-finite drift at x=" + std::to_string(x[l]));
                    }
                    const KillOutcome out =
                        killed_step_with(x[l], q, xi, dt, sqrt_dt, bridge, iv, [&] {
                            return rng::u01(
                                rng::philox_block(seed, static_cast<std::uint32_t>(i), step, 1).b);
                        });
                    if (out.killed) {
                        first_kill[i] = t;
                        kill_side[i] = out.boundary == BoundarySide::lower ? 1 : 2;
                        alive[l] = false;
                        --alive_count;
                    } else {
                        x[l] = out.position;
                        pos[static_cast<std::size_t>(t) * n + i] = x[l];
                    }
                }
            }
        }
    });

    // resolve kills in (sub-step, particle index) order; a resurrected
    // particle that dies again later in the window re-enters the queue
    std::vector<std::pair<std::uint32_t, std::uint32_t>> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (first_kill[i] < window) queue.emplace_back(first_kill[i], static_cast<std::uint32_t>(i));
    }
    std::sort(queue.begin(), queue.end());
    std::uint32_t draw = 0;
    std::uint32_t draw_sub_step = 0;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const auto [s, i] = queue[qi];
        if (s != draw_sub_step) {
            draw_sub_step = s;
            draw = 0;
        }
        // particles alive at this sub-step after earlier resolutions
        std::uint64_t candidates = 0;
        for (std::size_t j = 0; j < n; ++j) candidates += first_kill[j] > s;
        if (candidates == 0) {
            throw SimultaneousExtinctionError(
                "all " + std::to_string(n) + " particles were killed in step " +
                std::to_string(step0 + s) + "; decrease dt or increase N");
        }
        const std::uint64_t pick = rng::bounded(
            rng::philox_block(sys.seed, rng::kStreamResolution, step0 + s, draw++).a, candidates);
        std::size_t j = 0;
        std::uint64_t seen = 0;
        for (; j < n; ++j) {
            if (first_kill[j] <= s) continue;
            if (seen++ == pick) break;
        }
        if (sys.jump_log) {
            sys.jump_log->push_back(JumpEvent{sys.clock + (s + 1) * cfg.dt, i,
                                              kill_side[i] == 1 ? BoundarySide::lower
                                                                : BoundarySide::upper,
                                              static_cast<std::uint32_t>(j)});
        }
        ++sys.jump_count;
        const double target = pos[static_cast<std::size_t>(s) * n + j];
        pos[static_cast<std::size_t>(s) * n + i] = target;
        first_kill[i] = window;  // alive again; simulate() may set a later kill
        if (s + 1 < window) {
            simulate(i, s + 1, target);
            if (first_kill[i] < window) {
                const std::pair<std::uint32_t, std::uint32_t> ev{first_kill[i], i};
                queue.insert(std::upper_bound(queue.begin() + static_cast<std::ptrdiff_t>(qi) + 1,
                                              queue.end(), ev),
                             ev);
            }
        }
    }

    const double* last = pos + static_cast<std::size_t>(window - 1) * n;
    for (std::size_t i = 0; i < n; ++i) sys.positions[i] = last[i];
    sys.clock += static_cast<double>(window) * cfg.dt;
    sys.step_index += window;
}

inline std::uint32_t fv_window_size(std::size_t n) {
    // cap the window buffer at ~16 MB
    const std::uint64_t cap = 2'000'000 / std::max<std::uint64_t>(n, 1);
    return static_cast<std::uint32_t>(std::clamp<std::uint64_t>(cap, 1, 16));
}

}  // namespace detail

/// Advances every particle by one killed step, then resolves kills in
/// ascending particle index: each killed particle adopts the post-step
/// position of a particle drawn uniformly among the other N-1 that are alive
/// at resolution time (already-resurrected particles count as alive).
template <class DriftFn>
void fv_step(ParticleSystem& sys, DriftFn&& drift, const StepConfig& cfg, int workers = 1) {
    detail::fv_advance_window(sys, drift, cfg, workers, 1);
}

/// Advances the system by `steps` killed steps, batching the per-step
/// parallel dispatch into speculative windows. Identical results to calling
/// fv_step `steps` times.
template <class DriftFn>
void fv_advance(ParticleSystem& sys, DriftFn&& drift, const StepConfig& cfg, int workers,
                std::uint64_t steps) {
    const std::uint32_t window = detail::fv_window_size(sys.size());
    std::uint64_t done = 0;
    while (done < steps) {
        const auto k = static_cast<std::uint32_t>(std::min<std::uint64_t>(window, steps - done));
        detail::fv_advance_window(sys, drift, cfg, workers, k);
        done += k;
    }
}

/// Empirical measure: atoms of equal weight on the current positions.
struct EmpiricalMeasure {
    std::vector<double> positions;
    double total_mass = 1.0;

    Histogram binned(std::size_t bins, const Interval& iv) const {
        Histogram h = histogram_of_samples(positions, iv.lo, iv.hi, bins);
        h.rescale(total_mass);
        return h;
    }
};

inline EmpiricalMeasure empirical_measure(const ParticleSystem& sys) {
    return EmpiricalMeasure{sys.positions, 1.0};
}

/// ((N-1)/N)^{A_t}: the surviving fraction of the initial mass after A_t
/// jumps, each jump costing a factor (N-1)/N.
inline double mass_loss_factor(std::size_t n, std::uint64_t jumps) {
    return std::exp(static_cast<double>(jumps) * std::log1p(-1.0 / static_cast<double>(n)));
}

inline EmpiricalMeasure mass_loss_measure(const ParticleSystem& sys) {
    return EmpiricalMeasure{sys.positions, mass_loss_factor(sys.size(), sys.jump_count)};
}

struct FvRunConfig {
    std::size_t n_particles = 1000;
    StepConfig step;
    std::uint64_t seed = 1;
    int workers = 1;
    bool keep_jump_log = false;
};

/// Runs the system from n initial draws to time T and returns it.
template <class DriftFn>
ParticleSystem run_finite_time(const InitialSampler& init, double T, DriftFn&& drift,
                               const Interval& iv, const FvRunConfig& cfg) {
    if (!(T >= 0.0)) throw ValidationError("horizon T must be >= 0");
    ParticleSystem sys =
        init_particle_system(cfg.n_particles, iv, cfg.seed, init, cfg.keep_jump_log);
    const auto steps = static_cast<std::uint64_t>(std::llround(T / cfg.step.dt));
    fv_advance(sys, drift, cfg.step, cfg.workers, steps);
    return sys;
}

struct ErgodicConfig {
    std::size_t n_particles = 1000;
    StepConfig step;
    double epoch_spacing = 1.0;  // time between samples, per the 1/10000 sum protocol
    std::uint64_t burn_in_epochs = 0;
    std::uint64_t sample_epochs = 1;
    std::size_t bins = 100;
    std::uint64_t seed = 1;
    int workers = 1;
    InitialSampler init;  // defaults to uniform on the killing interval
    double boundary_warn_fraction = 0.25;
};

struct ErgodicRunReport {
    Histogram average;  // mass 1
    Interval kill_interval;
    std::uint64_t burn_in_epochs = 0;
    std::uint64_t sample_epochs = 0;
    std::size_t n_particles = 0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t jump_count = 0;
    double jump_rate = 0.0;  // jumps per unit time over the sampling window
    // max over sampled epochs of the particle fraction within r*L of a
    // killing endpoint, for r in {0.05, 0.02, 0.01}
    std::vector<std::pair<double, double>> boundary_profile;
    bool boundary_warning = false;
};

/// Burn-in, then the time average of the binned empirical measure over the
/// sampling epochs.
template <class DriftFn>
ErgodicRunReport run_ergodic(DriftFn&& drift, const Interval& iv, const ErgodicConfig& cfg) {
    if (cfg.sample_epochs < 1) throw ValidationError("sample_epochs must be >= 1");
    const auto steps_per_epoch =
        static_cast<std::uint64_t>(std::llround(cfg.epoch_spacing / cfg.step.dt));
    if (steps_per_epoch < 1) throw ValidationError("epoch spacing shorter than dt");

    const InitialSampler init = cfg.init ? cfg.init : uniform_init(iv);
    ParticleSystem sys = init_particle_system(cfg.n_particles, iv, cfg.seed, init, false);

    for (std::uint64_t e = 0; e < cfg.burn_in_epochs; ++e) {
        fv_advance(sys, drift, cfg.step, cfg.workers, steps_per_epoch);
    }
    const std::uint64_t jumps_after_burn_in = sys.jump_count;

    std::vector<std::uint64_t> counts(cfg.bins, 0);
    const double w = iv.length() / static_cast<double>(cfg.bins);
    const std::vector<double> radii = {0.05, 0.02, 0.01};
    std::vector<double> boundary_max(radii.size(), 0.0);
    bool warning = false;

    for (std::uint64_t e = 0; e < cfg.sample_epochs; ++e) {
        fv_advance(sys, drift, cfg.step, cfg.workers, steps_per_epoch);
        for (double x : sys.positions) {
            auto idx = static_cast<std::size_t>((x - iv.lo) / w);
            if (idx >= cfg.bins) idx = cfg.bins - 1;
            ++counts[idx];
        }
        for (std::size_t k = 0; k < radii.size(); ++k) {
            const double r = radii[k] * iv.length();
            std::size_t near = 0;
            for (double x : sys.positions) near += (x - iv.lo <= r) || (iv.hi - x <= r);
            const double frac = static_cast<double>(near) / static_cast<double>(cfg.n_particles);
            boundary_max[k] = std::max(boundary_max[k], frac);
            if (k == 0 && frac > cfg.boundary_warn_fraction) warning = true;
        }
    }

    std::vector<double> masses(cfg.bins);
    const double unit = 1.0 / (static_cast<double>(cfg.n_particles) *
                               static_cast<double>(cfg.sample_epochs));
    for (std::size_t i = 0; i < cfg.bins; ++i) masses[i] = static_cast<double>(counts[i]) * unit;

    ErgodicRunReport rep;
    rep.average = make_histogram(uniform_edges(iv.lo, iv.hi, cfg.bins), std::move(masses));
    rep.kill_interval = iv;
    rep.burn_in_epochs = cfg.burn_in_epochs;
    rep.sample_epochs = cfg.sample_epochs;
    rep.n_particles = cfg.n_particles;
    rep.dt = cfg.step.dt;
    rep.seed = cfg.seed;
    rep.jump_count = sys.jump_count;
    rep.jump_rate = static_cast<double>(sys.jump_count - jumps_after_burn_in) /
                    (static_cast<double>(cfg.sample_epochs) * cfg.epoch_spacing);
    for (std::size_t k = 0; k < radii.size(); ++k) {
        rep.boundary_profile.emplace_back(radii[k], boundary_max[k]);
    }
    rep.boundary_warning = warning;
    return rep;
}

}  // namespace qsd
