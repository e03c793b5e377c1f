#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace qsd::rng {

// Counter-based generation: every random number is a pure function of
// (seed, stream, step, slot). Particle i uses stream i, so a step of the
// particle system can be partitioned across any number of workers and
// still produce identical draws.

namespace detail {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

struct Ctr4 {
    std::uint32_t v[4];
};

inline void philox_round(Ctr4& c, std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c.v[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c.v[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c = Ctr4{{hi1 ^ c.v[1] ^ k0, lo1, hi0 ^ c.v[3] ^ k1, lo0}};
}

inline Ctr4 philox4x32_10(Ctr4 c, std::uint32_t k0, std::uint32_t k1) {
    for (int r = 0; r < 10; ++r) {
        philox_round(c, k0, k1);
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return c;
}

}  // namespace detail

/// 128 random bits, exposed as two 64-bit words.
struct Block {
    std::uint64_t a;
    std::uint64_t b;
};

inline Block philox_block(std::uint64_t seed, std::uint32_t stream, std::uint64_t step,
                          std::uint32_t slot) {
    detail::Ctr4 ctr{{slot, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                      stream}};
    const auto out = detail::philox4x32_10(ctr, static_cast<std::uint32_t>(seed),
                                           static_cast<std::uint32_t>(seed >> 32));
    return Block{out.v[0] | (static_cast<std::uint64_t>(out.v[1]) << 32),
                 out.v[2] | (static_cast<std::uint64_t>(out.v[3]) << 32)};
}

/// Uniform double in the open interval (0,1); extremes are 2^-53 and 1-2^-53.
inline double u01(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Uniform index in [0, n), n >= 1 (Lemire's multiply-shift reduction).
inline std::uint64_t bounded(std::uint64_t bits, std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits) * static_cast<unsigned __int128>(n)) >> 64);
}

/// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16).
/// Relative accuracy about 1e-16 over (0,1).
inline double normal_icdf(double p) {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) *
                         r +
                     1.27045825245236838258e0) *
                        r +
                    3.64784832476320460504e0) *
                       r +
                   5.76949722146069140550e0) *
                      r +
                  4.63033784615654529590e0) *
                     r +
                 1.42343711074968357734e0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) *
                         r +
                     1.48103976427480074590e-1) *
                        r +
                    6.89767334985100004550e-1) *
                       r +
                   1.67638483018380384940e0) *
                      r +
                  2.05319162663775882187e0) *
                     r +
                 1.0);
    } else {
        r -= 5.0;
        value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) *
                         r +
                     2.65321895265761230930e-2) *
                        r +
                    2.96560571828504891230e-1) *
                       r +
                   1.78482653991729133580e0) *
                      r +
                  5.46378491116411436990e0) *
                     r +
                 6.65790464350110377720e0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) *
                         r +
                     7.86869131145613259100e-4) *
                        r +
                    1.48753612908506148525e-2) *
                       r +
                   1.36929880922735805310e-1) *
                      r +
                  5.99832206555887937690e-1) *
                     r +
                 1.0);
    }
    return q < 0.0 ? -value : value;
}

// Reserved stream ids; particle and path indices stay below these.
constexpr std::uint32_t kStreamResolution = 0xFFFFFFFFu;
constexpr std::uint32_t kStreamInit = 0xFFFFFFFEu;
constexpr std::uint32_t kStreamMax = 0xFFFFFFF0u;

// Step value reserved for draws made before time stepping begins.
constexpr std::uint64_t kStepInit = ~std::uint64_t{0};

/// Slot-addressed random draws for one (seed, stream, step) cell. Distinct
/// draws must use distinct slots. Copies are free; the object carries no
/// state beyond its coordinates.
class StepRng {
public:
    StepRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t step)
        : seed_(seed), stream_(stream), step_(step) {}

    Block raw(std::uint32_t slot) const { return philox_block(seed_, stream_, step_, slot); }

    double normal(std::uint32_t slot) const { return normal_icdf(u01(raw(slot).a)); }

    double uniform(std::uint32_t slot) const { return u01(raw(slot).b); }

    std::uint64_t bounded_int(std::uint32_t slot, std::uint64_t n) const {
        return bounded(raw(slot).a, n);
    }

private:
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::uint64_t step_;
};

/// Per-particle draws for the stepping engines. One Philox block carries the
/// gaussians of the particle pair (2k, 2k+1), so a normal costs half a block;
/// the bridge uniform sits in its own slot keyed by the full particle index
/// and is only generated near a boundary. Pure function of
/// (seed, index, step): any worker can reproduce any draw.
class ParticleRng {
public:
    ParticleRng(std::uint64_t seed, std::uint32_t index, std::uint64_t step)
        : seed_(seed), index_(index), step_(step) {}

    double normal(std::uint32_t /*slot*/) const {
        const Block blk = philox_block(seed_, index_ >> 1, step_, 0);
        return normal_icdf(u01((index_ & 1u) ? blk.b : blk.a));
    }

    double uniform(std::uint32_t slot) const {
        return u01(philox_block(seed_, index_, step_, slot).b);
    }

private:
    std::uint64_t seed_;
    std::uint32_t index_;
    std::uint64_t step_;
};

}  // namespace qsd::rng
