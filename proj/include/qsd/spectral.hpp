#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "qsd/density_grid.hpp"
#include "qsd/domain.hpp"
#include "qsd/errors.hpp"
#include "qsd/model.hpp"

namespace qsd {

/// Ground state of the Sturm-Liouville problem -v'' + W v = (2 lambda) v on
/// the killing interval with Dirichlet endpoints, and the QSD density
/// proportional to v e^{-Q}.
struct EigenResult {
    double lambda = 0.0;              // the operator eigenvalue is 2*lambda
    std::vector<double> grid;         // M+2 points including both endpoints
    std::vector<double> v;            // exactly 0 at the endpoints, positive inside
    std::vector<double> qsd_density;  // trapezoid mass 1
    double residual = 0.0;            // max |(-D2 + W) v - 2 lambda v| on the grid
    int iterations = 0;
};

struct SolveOptions {
    int max_iterations = 120;
    double residual_tol = 1e-8;  // relative to max |v|
};

namespace detail {

/// Solves (T - sigma I) out = rhs for the tridiagonal T = -D2 + diag(W).
struct TridiagSolver {
    std::vector<double> c_prime;
    std::vector<double> denom;
    double off = 0.0;

    void factor(const std::vector<double>& diag, double off_value, double sigma) {
        const std::size_t m = diag.size();
        off = off_value;
        c_prime.resize(m);
        denom.resize(m);
        double d = diag[0] - sigma;
        denom[0] = d;
        c_prime[0] = off / d;
        for (std::size_t i = 1; i < m; ++i) {
            d = diag[i] - sigma - off * c_prime[i - 1];
            denom[i] = d;
            c_prime[i] = off / d;
        }
    }

    void solve(const std::vector<double>& rhs, std::vector<double>& out) const {
        const std::size_t m = rhs.size();
        out.resize(m);
        out[0] = rhs[0] / denom[0];
        for (std::size_t i = 1; i < m; ++i) {
            out[i] = (rhs[i] - off * out[i - 1]) / denom[i];
        }
        for (std::size_t i = m - 1; i-- > 0;) {
            out[i] -= c_prime[i] * out[i + 1];
        }
    }
};

inline long double rayleigh_quotient(const std::vector<double>& diag, double off,
                                     const std::vector<double>& v) {
    const std::size_t m = v.size();
    long double num = 0.0L;
    long double den = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
        long double tv = static_cast<long double>(diag[i]) * v[i];
        if (i > 0) tv += static_cast<long double>(off) * v[i - 1];
        if (i + 1 < m) tv += static_cast<long double>(off) * v[i + 1];
        num += tv * v[i];
        den += static_cast<long double>(v[i]) * v[i];
    }
    return num / den;
}

inline long double residual_inf(const std::vector<double>& diag, double off,
                                const std::vector<double>& v, long double theta) {
    const std::size_t m = v.size();
    long double worst = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
        long double tv = static_cast<long double>(diag[i]) * v[i];
        if (i > 0) tv += static_cast<long double>(off) * v[i - 1];
        if (i + 1 < m) tv += static_cast<long double>(off) * v[i + 1];
        worst = std::max(worst, std::abs(tv - theta * v[i]));
    }
    return worst;
}

inline void normalize_euclid(std::vector<double>& v) {
    long double s = 0.0L;
    for (double x : v) s += static_cast<long double>(x) * x;
    const double inv = 1.0 / static_cast<double>(std::sqrt(s));
    for (auto& x : v) x *= inv;
}

}  // namespace detail

/// Shifted inverse power iteration on the central-difference discretization.
/// W and Q are evaluated on the uniform interior grid; Q only enters the
/// density output.
template <class WFn, class QFn>
EigenResult solve_ground_state_on(WFn&& W_of, QFn&& Q_of, const Interval& iv, std::size_t grid_points,
                                  const SolveOptions& opts = {}) {
    if (grid_points < 100) throw ValidationError("spectral solve needs at least 100 grid points");
    const std::size_t m = grid_points;
    const double h = iv.length() / static_cast<double>(m + 1);
    const double off = -1.0 / (h * h);

    std::vector<double> x(m);
    std::vector<double> diag(m);
    double w_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        x[i] = iv.lo + h * static_cast<double>(i + 1);
        const double w = W_of(x[i]);
        if (!std::isfinite(w)) {
            throw EvalError("W is not finite at x=" + std::to_string(x[i]));
        }
        diag[i] = 2.0 / (h * h) + w;
        w_min = std::min(w_min, w);
    }

    detail::TridiagSolver solver;
    double sigma = w_min - 1.0;  // strictly below the spectrum (Gershgorin)
    solver.factor(diag, off, sigma);

    std::vector<double> v(m, 1.0);
    detail::normalize_euclid(v);
    std::vector<double> next;
    long double theta = 0.0L;
    long double theta_prev = std::numeric_limits<long double>::infinity();
    int it = 0;
    bool reshifted = false;
    for (; it < opts.max_iterations; ++it) {
        solver.solve(v, next);
        detail::normalize_euclid(next);
        v.swap(next);
        theta = detail::rayleigh_quotient(diag, off, v);
        const long double change = std::abs(theta - theta_prev);
        theta_prev = theta;
        if (!reshifted && change < 1e-9L * (std::abs(theta) + 1.0L)) {
            // eigenvalue is already accurate; move the shift next to it so the
            // eigenvector reaches machine precision in the remaining sweeps
            sigma = static_cast<double>(theta) -
                    std::max(1e-7 * std::abs(static_cast<double>(theta)), 1e-9);
            solver.factor(diag, off, sigma);
            reshifted = true;
            continue;
        }
        if (reshifted && change < 1e-15L * (std::abs(theta) + 1.0L)) {
            ++it;
            break;
        }
    }

    const double v_max = std::abs(*std::max_element(
        v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }));
    const double residual = static_cast<double>(detail::residual_inf(diag, off, v, theta));
    // a double-stored eigenvector cannot have residual below ~eps * ||T||
    const double representable =
        16.0 * std::numeric_limits<double>::epsilon() *
        (2.0 / (h * h) + std::abs(static_cast<double>(theta)));
    if (residual > std::max(opts.residual_tol, representable) * v_max) {
        throw SolverError("eigen-iteration did not converge: residual " + std::to_string(residual) +
                          " after " + std::to_string(it) + " iterations");
    }

    // orient positive and verify the ground state has no interior sign change
    double sum = 0.0;
    for (double val : v) sum += val;
    if (sum < 0.0) {
        for (auto& val : v) val = -val;
    }
    for (double val : v) {
        if (val < -1e-12 * v_max) {
            throw SolverError("converged eigenvector changes sign in the interior; not the ground state");
        }
    }
    for (auto& val : v) val = std::max(val, 0.0);

    // discrete L2(dx) normalization: sum v^2 h = 1
    {
        long double s = 0.0L;
        for (double val : v) s += static_cast<long double>(val) * val;
        const double inv = 1.0 / std::sqrt(static_cast<double>(s) * h);
        for (auto& val : v) val *= inv;
    }

    EigenResult res;
    res.lambda = static_cast<double>(theta) / 2.0;
    res.residual = residual;
    res.iterations = it;
    res.grid.resize(m + 2);
    res.v.resize(m + 2, 0.0);
    res.grid[0] = iv.lo;
    res.grid[m + 1] = iv.hi;
    for (std::size_t i = 0; i < m; ++i) {
        res.grid[i + 1] = x[i];
        res.v[i + 1] = v[i];
    }

    // density proportional to v e^{-Q}; shift Q so the exponential cannot overflow
    std::vector<double> q_vals(m + 2);
    double q_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m + 2; ++i) {
        q_vals[i] = Q_of(res.grid[i]);
        if (!std::isfinite(q_vals[i])) {
            throw EvalError("Q is not finite at x=" + std::to_string(res.grid[i]));
        }
        q_min = std::min(q_min, q_vals[i]);
    }
    res.qsd_density.resize(m + 2);
    for (std::size_t i = 0; i < m + 2; ++i) {
        res.qsd_density[i] = res.v[i] * std::exp(-(q_vals[i] - q_min));
    }
    const double z = trapezoid(res.grid, res.qsd_density);
    if (!(z > 0.0) || !std::isfinite(z)) throw SolverError("QSD density has non-positive mass");
    for (auto& d : res.qsd_density) d /= z;
    return res;
}

inline EigenResult solve_ground_state(const DiffusionModel& model, const Interval& iv,
                                      std::size_t grid_points, const SolveOptions& opts = {}) {
    return solve_ground_state_on(
        [&model](double x) {
            const double q = model.q(x);
            return q * q - model.q_prime(x);
        },
        [&model](double x) { return eval_Q(model, x); }, iv, grid_points, opts);
}

struct EpsSweepEntry {
    double epsilon = 0.0;
    double lambda = 0.0;
    std::vector<double> grid;
    std::vector<double> density;
};

struct EpsSweepReport {
    std::vector<EpsSweepEntry> entries;        // ordered by decreasing epsilon
    std::vector<double> tv_successive;         // TV(nu_eps_k, nu_eps_{k+1})
};

/// Solves each truncation with the grid spacing implied by giving
/// `grid_points` interior points to the widest (last) truncation, so the
/// discretization bias is consistent across the sweep.
inline EpsSweepReport eps_sweep(const DiffusionModel& model, const std::vector<double>& eps_list,
                                std::size_t grid_points, const SolveOptions& opts = {}) {
    if (eps_list.empty()) throw ValidationError("eps sweep needs at least one epsilon");
    for (std::size_t i = 0; i + 1 < eps_list.size(); ++i) {
        if (!(eps_list[i] > eps_list[i + 1])) {
            throw ValidationError("eps sweep requires a strictly decreasing epsilon sequence");
        }
    }
    double widest = 0.0;
    for (double e : eps_list) widest = std::max(widest, truncate(model.domain, e).length());
    const double h = widest / static_cast<double>(grid_points + 1);

    EpsSweepReport rep;
    for (double e : eps_list) {
        const Interval iv = truncate(model.domain, e);
        const auto m = static_cast<std::size_t>(
            std::max<long long>(100, std::llround(iv.length() / h) - 1));
        EigenResult r = solve_ground_state(model, iv, m, opts);
        rep.entries.push_back(EpsSweepEntry{e, r.lambda, std::move(r.grid), std::move(r.qsd_density)});
    }
    for (std::size_t i = 0; i + 1 < rep.entries.size(); ++i) {
        rep.tv_successive.push_back(grid_tv(rep.entries[i].grid, rep.entries[i].density,
                                            rep.entries[i + 1].grid, rep.entries[i + 1].density));
    }
    return rep;
}

}  // namespace qsd
