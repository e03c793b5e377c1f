#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsd/errors.hpp"

namespace qsd {

/// Binned measure on the real line: edges are strictly increasing,
/// masses[i] sits on [edges[i], edges[i+1]).
struct Histogram {
    std::vector<double> edges;
    std::vector<double> masses;
    double total_mass = 0.0;

    std::size_t bins() const { return masses.size(); }
    double lo() const { return edges.front(); }
    double hi() const { return edges.back(); }

    double width(std::size_t i) const { return edges[i + 1] - edges[i]; }
    double density(std::size_t i) const { return masses[i] / width(i); }

    void rescale(double factor) {
        for (auto& m : masses) m *= factor;
        total_mass *= factor;
    }

    Histogram normalized() const {
        if (!(total_mass > 0.0)) throw ValidationError("cannot normalize a histogram of mass 0");
        Histogram h = *this;
        h.rescale(1.0 / total_mass);
        return h;
    }
};

inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
    if (!(lo < hi) || bins == 0) throw ValidationError("bad bin specification");
    std::vector<double> e(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    e.back() = hi;
    return e;
}

inline Histogram make_histogram(std::vector<double> edges, std::vector<double> masses) {
    if (edges.size() != masses.size() + 1 || masses.empty()) {
        throw ValidationError("histogram needs edges = bins + 1");
    }
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i] < edges[i + 1])) throw ValidationError("histogram edges must increase");
    }
    double total = 0.0;
    for (double m : masses) {
        if (m < 0.0 || !std::isfinite(m)) throw ValidationError("histogram masses must be finite and >= 0");
        total += m;
    }
    return Histogram{std::move(edges), std::move(masses), total};
}

/// Mass-1 histogram of the samples. Every sample must lie in [lo, hi].
inline Histogram histogram_of_samples(std::span<const double> samples, double lo, double hi,
                                      std::size_t bins) {
    if (samples.empty()) throw ValidationError("cannot bin an empty sample set");
    auto edges = uniform_edges(lo, hi, bins);
    std::vector<double> masses(bins, 0.0);
    const double unit = 1.0 / static_cast<double>(samples.size());
    for (double x : samples) {
        if (!(x >= lo && x <= hi)) {
            throw ValidationError("sample " + std::to_string(x) + " outside binning range [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        // bins are [edges[i], edges[i+1]); the top edge joins the last bin
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        auto idx = static_cast<std::size_t>(it - edges.begin());
        idx = idx == 0 ? 0 : idx - 1;
        if (idx >= bins) idx = bins - 1;
        masses[idx] += unit;
    }
    return make_histogram(std::move(edges), std::move(masses));
}

namespace detail {

inline bool same_edges(const Histogram& a, const Histogram& b) {
    return a.edges == b.edges;
}

/// Union refinement of two histograms. Mass inside a bin is treated as
/// uniformly spread, so refining a histogram against itself is lossless.
struct Aligned {
    std::vector<double> edges;
    std::vector<double> m1;
    std::vector<double> m2;
};

inline std::vector<double> slice_masses(const Histogram& h, const std::vector<double>& edges) {
    std::vector<double> out(edges.size() - 1, 0.0);
    std::size_t src = 0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double mid = 0.5 * (edges[i] + edges[i + 1]);
        if (mid < h.lo() || mid > h.hi()) continue;
        while (src + 1 < h.edges.size() && h.edges[src + 1] <= mid) ++src;
        if (src >= h.bins()) continue;
        out[i] = h.masses[src] * (edges[i + 1] - edges[i]) / h.width(src);
    }
    return out;
}

inline Aligned align(const Histogram& a, const Histogram& b) {
    if (std::min(a.hi(), b.hi()) <= std::max(a.lo(), b.lo())) {
        throw IncompatibleRangesError("histogram ranges [" + std::to_string(a.lo()) + ", " +
                                      std::to_string(a.hi()) + "] and [" + std::to_string(b.lo()) +
                                      ", " + std::to_string(b.hi()) + "] do not overlap");
    }
    if (same_edges(a, b)) return Aligned{a.edges, a.masses, b.masses};
    std::vector<double> edges;
    edges.reserve(a.edges.size() + b.edges.size());
    edges.insert(edges.end(), a.edges.begin(), a.edges.end());
    edges.insert(edges.end(), b.edges.begin(), b.edges.end());
    std::sort(edges.begin(), edges.end());
    const double tol = 1e-12 * (edges.back() - edges.front());
    std::vector<double> merged;
    merged.reserve(edges.size());
    for (double e : edges) {
        if (merged.empty() || e - merged.back() > tol) merged.push_back(e);
    }
    return Aligned{merged, slice_masses(a, merged), slice_masses(b, merged)};
}

}  // namespace detail

/// Total variation distance 1/2 sum |m1 - m2| after union refinement.
inline double distance_tv(const Histogram& a, const Histogram& b) {
    const auto al = detail::align(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < al.m1.size(); ++i) s += std::abs(al.m1[i] - al.m2[i]);
    return 0.5 * s;
}

/// 1-D Wasserstein distance: L1 distance between the aligned CDFs, with mass
/// spread uniformly inside each bin.
inline double distance_w1(const Histogram& a, const Histogram& b) {
    const auto al = detail::align(a, b);
    double total = 0.0;
    double f1 = 0.0;
    double f2 = 0.0;
    for (std::size_t i = 0; i < al.m1.size(); ++i) {
        const double w = al.edges[i + 1] - al.edges[i];
        const double d0 = f1 - f2;
        const double d1 = d0 + (al.m1[i] - al.m2[i]);
        if (d0 * d1 >= 0.0) {
            total += 0.5 * (std::abs(d0) + std::abs(d1)) * w;
        } else {
            total += 0.5 * w * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1));
        }
        f1 += al.m1[i];
        f2 += al.m2[i];
    }
    return total;
}

/// Image of a histogram under a strictly monotone map: edges are mapped,
/// per-bin masses are preserved.
template <class Fn>
Histogram pushforward(const Histogram& h, Fn&& map) {
    std::vector<double> probe;
    probe.reserve(2 * h.edges.size());
    for (std::size_t i = 0; i < h.edges.size(); ++i) {
        probe.push_back(map(h.edges[i]));
        if (i + 1 < h.edges.size()) probe.push_back(map(0.5 * (h.edges[i] + h.edges[i + 1])));
    }
    bool increasing = true;
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < probe.size(); ++i) {
        if (!(probe[i] < probe[i + 1])) increasing = false;
        if (!(probe[i] > probe[i + 1])) decreasing = false;
    }
    if (!increasing && !decreasing) {
        throw ValidationError("pushforward map is not strictly monotone on the histogram range");
    }
    std::vector<double> edges(h.edges.size());
    for (std::size_t i = 0; i < h.edges.size(); ++i) edges[i] = map(h.edges[i]);
    std::vector<double> masses = h.masses;
    if (decreasing) {
        std::reverse(edges.begin(), edges.end());
        std::reverse(masses.begin(), masses.end());
    }
    return make_histogram(std::move(edges), std::move(masses));
}

}  // namespace qsd
