#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/histogram.hpp"

namespace qsd {

// Helpers for densities tabulated on ordered grids (spectral output),
// interpreted as piecewise linear between nodes and zero outside.

inline double grid_interp(std::span<const double> grid, std::span<const double> values, double x) {
    if (x <= grid.front() || x >= grid.back()) {
        if (x == grid.front()) return values.front();
        if (x == grid.back()) return values.back();
        return 0.0;
    }
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    return values[i] + t * (values[i + 1] - values[i]);
}

inline double trapezoid(std::span<const double> grid, std::span<const double> values) {
    // Kahan summation; grids can run to 1e6+ nodes and downstream checks
    // expect the mass to hold to 1e-10.
    double s = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double term = 0.5 * (values[i] + values[i + 1]) * (grid[i + 1] - grid[i]) - carry;
        const double t = s + term;
        carry = (t - s) - term;
        s = t;
    }
    return s;
}

/// 1/2 L1 distance between two grid densities under trapezoid quadrature on
/// a uniform refinement of the union of their supports.
inline double grid_tv(std::span<const double> g1, std::span<const double> d1,
                      std::span<const double> g2, std::span<const double> d2,
                      std::size_t points = 400001) {
    const double lo = std::min(g1.front(), g2.front());
    const double hi = std::max(g1.back(), g2.back());
    double prev = std::abs(grid_interp(g1, d1, lo) - grid_interp(g2, d2, lo));
    const double h = (hi - lo) / static_cast<double>(points - 1);
    double s = 0.0;
    for (std::size_t i = 1; i < points; ++i) {
        const double x = lo + h * static_cast<double>(i);
        const double cur = std::abs(grid_interp(g1, d1, x) - grid_interp(g2, d2, x));
        s += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    return 0.5 * s;
}

/// Integrates a piecewise-linear grid density over histogram bins.
inline Histogram bin_grid_density(std::span<const double> grid, std::span<const double> density,
                                  const std::vector<double>& edges) {
    std::vector<double> masses(edges.size() - 1, 0.0);
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        const double l = edges[b];
        const double r = edges[b + 1];
        // nodes strictly inside the bin plus the bin endpoints
        double prev_x = l;
        double prev_d = grid_interp(grid, density, l);
        double acc = 0.0;
        const auto first = std::upper_bound(grid.begin(), grid.end(), l);
        for (auto it = first; it != grid.end() && *it < r; ++it) {
            const double d = density[static_cast<std::size_t>(it - grid.begin())];
            acc += 0.5 * (prev_d + d) * (*it - prev_x);
            prev_x = *it;
            prev_d = d;
        }
        const double dr = grid_interp(grid, density, r);
        acc += 0.5 * (prev_d + dr) * (r - prev_x);
        masses[b] = std::max(0.0, acc);
    }
    return make_histogram(edges, std::move(masses));
}

/// Quantile sampler for a nonnegative grid density (piecewise linear).
class GridDensityQuantile {
public:
    GridDensityQuantile(std::vector<double> grid, std::vector<double> density)
        : grid_(std::move(grid)), density_(std::move(density)) {
        if (grid_.size() != density_.size() || grid_.size() < 2) {
            throw ValidationError("grid density needs matching grid/density of size >= 2");
        }
        cdf_.resize(grid_.size(), 0.0);
        for (std::size_t i = 1; i < grid_.size(); ++i) {
            cdf_[i] = cdf_[i - 1] +
                      0.5 * (density_[i - 1] + density_[i]) * (grid_[i] - grid_[i - 1]);
        }
        const double z = cdf_.back();
        if (!(z > 0.0)) throw ValidationError("grid density has zero mass");
        for (auto& c : cdf_) c /= z;
        for (auto& d : density_) d /= z;
    }

    /// Maps a uniform u in (0,1) to the corresponding quantile.
    double operator()(double u) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
        if (i + 1 >= grid_.size()) i = grid_.size() - 2;
        const double h = grid_[i + 1] - grid_[i];
        const double d0 = density_[i];
        const double slope = (density_[i + 1] - density_[i]) / h;
        const double target = u - cdf_[i];
        // solve d0*t + slope*t^2/2 = target for t in [0, h]
        double t;
        if (std::abs(slope) * h < 1e-14 * (d0 + 1e-300)) {
            t = d0 > 0.0 ? target / d0 : 0.0;
        } else {
            const double disc = d0 * d0 + 2.0 * slope * target;
            t = disc > 0.0 ? (-d0 + std::sqrt(disc)) / slope : 0.0;
        }
        t = std::clamp(t, 0.0, h);
        return grid_[i] + t;
    }

private:
    std::vector<double> grid_;
    std::vector<double> density_;
    std::vector<double> cdf_;
};

}  // namespace qsd
