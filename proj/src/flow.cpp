#include "rimpact/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rimpact {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

struct Stepper {
    const Rhs& rhs;
    std::size_t n;
    Vec k1, k2, k3, k4, k5, k6, k7, tmp, u5, u4;

    explicit Stepper(const Rhs& f, std::size_t dim)
        : rhs(f), n(dim), k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim),
          tmp(dim), u5(dim), u4(dim) {}

    // One trial step from (t, u) with size h; returns the scaled error norm
    // and fills u5 (5th order result).
    double attempt(double t, const Vec& u, double h, double tol) {
        rhs(t, u, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * a21 * k1[i];
        rhs(t + c2 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(t + c3 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = u[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(t + c4 * h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = u[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(t + c5 * h, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = u[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                 a65 * k5[i]);
        rhs(t + h, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            u5[i] = u[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(t + h, u5, k7);
        for (std::size_t i = 0; i < n; ++i)
            u4[i] = u[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                                e7 * k7[i]);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double sc = tol + tol * std::max(std::abs(u[i]), std::abs(u5[i]));
            const double d = (u5[i] - u4[i]) / sc;
            err += d * d;
        }
        return std::sqrt(err / static_cast<double>(n));
    }
};

double initial_step(double span, double tol) {
    return std::min(span, std::max(1e-8 * span, std::pow(tol, 0.2) * span * 0.1));
}

}  // namespace

std::vector<Vec> rk45_at_nodes(const Rhs& rhs, std::span<const double> times,
                               std::span<const double> u0, double tol, StepStats* stats,
                               long step_budget) {
    if (times.size() < 2) throw std::invalid_argument("rk45: need at least two node times");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("rk45: node times must be strictly increasing");
    if (!(tol > 0.0)) throw std::invalid_argument("rk45: tol must be > 0");
    if (!all_finite(u0)) throw std::domain_error("rk45: non-finite initial state");

    const std::size_t n = u0.size();
    Stepper st(rhs, n);
    StepStats local;
    local.min_step = std::numeric_limits<double>::infinity();

    std::vector<Vec> out;
    out.reserve(times.size());
    Vec u(u0.begin(), u0.end());
    out.emplace_back(u);

    const double total_span = times.back() - times.front();
    double t = times.front();
    double h = initial_step(total_span, tol);
    long budget = step_budget;

    Vec micro(n);
    for (std::size_t node = 1; node < times.size(); ++node) {
        const double target = times[node];
        while (t < target) {
            const double span = target - t;
            if (span <= 1e-8 * std::max(1.0, std::abs(t))) {
                // sub-resolution window: one explicit Euler step is exact to
                // O(span^2), far below any tolerance the caller can ask for
                rhs(t, u, micro);
                axpy(span, micro, u);
                t = target;
                ++local.accepted;
                break;
            }
            const bool lands = h >= target - t;
            const double h_try = lands ? target - t : h;
            const double err = st.attempt(t, u, h_try, tol);
            if (--budget <= 0) throw IntegrationError("rk45: step budget exhausted", t);
            if (err <= 1.0) {
                t = lands ? target : t + h_try;
                u = st.u5;
                ++local.accepted;
                local.min_step = std::min(local.min_step, h_try);
                const double grow = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
                h = h_try * std::clamp(grow, 0.2, 5.0);
                if (!all_finite(u)) throw IntegrationError("rk45: state became non-finite", t);
            } else {
                ++local.rejected;
                h = h_try * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
            }
            if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
                throw IntegrationError("rk45: step size underflow (stiffness?)", t);
        }
        out.emplace_back(u);
    }
    if (stats) *stats = local;
    return out;
}

std::vector<Vec> implicit_midpoint_at_nodes(const Rhs& rhs, std::span<const double> times,
                                            std::span<const double> u0,
                                            int substeps_per_interval) {
    if (times.size() < 2) throw std::invalid_argument("midpoint: need at least two node times");
    const std::size_t n = u0.size();
    std::vector<Vec> out;
    out.reserve(times.size());
    Vec u(u0.begin(), u0.end());
    out.emplace_back(u);
    Vec mid(n), f(n), next(n);
    for (std::size_t node = 1; node < times.size(); ++node) {
        const double h = (times[node] - times[node - 1]) / substeps_per_interval;
        double t = times[node - 1];
        for (int s = 0; s < substeps_per_interval; ++s) {
            next = u;
            for (int it = 0; it < 100; ++it) {
                for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (u[i] + next[i]);
                rhs(t + 0.5 * h, mid, f);
                double delta = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = u[i] + h * f[i];
                    delta = std::max(delta, std::abs(v - next[i]));
                    next[i] = v;
                }
                if (delta < 1e-14 * (1.0 + norm2(next))) break;
            }
            u = next;
            t += h;
        }
        out.emplace_back(u);
    }
    return out;
}

Rhs hamiltonian_rhs(const HamiltonianSpec& spec) {
    return [spec](double t, std::span<const double> u, std::span<double> dudt) {
        thread_local Vec grad;
        grad.assign(u.size(), 0.0);
        h_grad(spec, t, u, grad);
        apply_j(grad, dudt);
    };
}

SegmentResult integrate_segment(const HamiltonianSpec& spec, std::span<const double> u0,
                                double t0, double t1, double tol,
                                std::span<const double> nodes) {
    if (!(t0 < t1)) throw std::invalid_argument("integrate_segment: requires t0 < t1");
    if (!(tol > 0.0)) throw std::invalid_argument("integrate_segment: tol must be > 0");
    std::vector<double> times;
    if (nodes.empty()) {
        times = {t0, t1};
    } else {
        if (nodes.front() != t0 || nodes.back() != t1)
            throw std::invalid_argument("integrate_segment: nodes must span [t0, t1]");
        times.assign(nodes.begin(), nodes.end());
    }
    SegmentResult result;
    result.at_nodes = rk45_at_nodes(hamiltonian_rhs(spec), times, u0, tol, &result.stats);
    result.energy_drift =
        std::abs(h_value(spec, t1, result.at_nodes.back()) - h_value(spec, t0, u0));
    return result;
}

PiecewisePath propagate_orbit(const HamiltonianSpec& spec, std::span<const double> u0,
                              const SampleOrbit& orbit, const GridSpec& grid, double tol,
                              long step_budget) {
    PiecewisePath out;
    out.path.grid = make_orbit_grid(grid, orbit.horizon, orbit.times);
    out.path.dim = static_cast<int>(u0.size());
    out.path.values.assign(
        static_cast<std::size_t>(out.path.grid.node_count()) * out.path.dim, 0.0);
    out.stats.min_step = std::numeric_limits<double>::infinity();

    Vec u(u0.begin(), u0.end());
    const Rhs rhs = hamiltonian_rhs(spec);
    for (std::size_t s = 0; s < out.path.grid.segments.size(); ++s) {
        const Segment& seg = out.path.grid.segments[s];
        std::span<const double> seg_times(out.path.grid.times.data() + seg.begin,
                                          static_cast<std::size_t>(seg.size()));
        StepStats stats;
        const std::vector<Vec> vals = rk45_at_nodes(rhs, seg_times, u, tol, &stats, step_budget);
        out.stats.accepted += stats.accepted;
        out.stats.rejected += stats.rejected;
        out.stats.min_step = std::min(out.stats.min_step, stats.min_step);
        double drift = 0.0;
        const double h0 = h_value(spec, seg_times.front(), vals.front());
        for (int i = 0; i < seg.size(); ++i) {
            const auto dst = out.path.node(seg.begin + i);
            std::copy(vals[static_cast<std::size_t>(i)].begin(),
                      vals[static_cast<std::size_t>(i)].end(), dst.begin());
            drift = std::max(drift,
                             std::abs(h_value(spec, seg_times[static_cast<std::size_t>(i)],
                                              vals[static_cast<std::size_t>(i)]) -
                                      h0));
        }
        out.segment_drift.push_back(drift);
        u = vals.back();
        if (s < out.path.grid.impulse_left.size()) {
            // the jump is applied exactly: right value = left value + Delta_j
            axpy(1.0, orbit.jumps[s], u);
        }
    }
    return out;
}

std::vector<double> energy_drift(const PiecewisePath& path, const HamiltonianSpec& spec) {
    std::vector<double> drift;
    drift.reserve(path.path.grid.segments.size());
    for (const Segment& seg : path.path.grid.segments) {
        const double h0 =
            h_value(spec, path.path.grid.times[static_cast<std::size_t>(seg.begin)],
                    path.path.node(seg.begin));
        double d = 0.0;
        for (int i = seg.begin; i < seg.end; ++i)
            d = std::max(d, std::abs(h_value(spec,
                                             path.path.grid.times[static_cast<std::size_t>(i)],
                                             path.path.node(i)) -
                                     h0));
        drift.push_back(d);
    }
    return drift;
}

double first_return_time(const HamiltonianSpec& spec, double radius, int dim, double tol) {
    if (!(radius > 0.0)) throw std::invalid_argument("first_return_time: radius must be > 0");
    Vec u0(static_cast<std::size_t>(dim), 0.0);
    u0[0] = radius;
    const Vec ju0 = apply_j_copy(u0);
    const double r2 = radius * radius;
    const Rhs rhs = hamiltonian_rhs(spec);

    const auto angle_of = [&](const Vec& u) {
        return std::atan2(dot(u, ju0) / r2, dot(u, u0) / r2);
    };

    constexpr double kTwoPi = 6.283185307179586476925286766559;
    Stepper st(rhs, static_cast<std::size_t>(dim));
    Vec u = u0;
    double t = 0.0;
    double theta = 0.0;
    double h = initial_step(1.0, tol);
    double t_prev = 0.0;
    Vec u_prev = u;
    double theta_prev = 0.0;
    for (long it = 0; it < 20'000'000; ++it) {
        const double err = st.attempt(t, u, h, tol);
        if (err <= 1.0) {
            t_prev = t;
            u_prev = u;
            theta_prev = theta;
            const double a_old = angle_of(u);
            u = st.u5;
            t += h;
            double delta = angle_of(u) - a_old;
            if (delta > 3.141592653589793) delta -= kTwoPi;
            if (delta < -3.141592653589793) delta += kTwoPi;
            theta += delta;
            const double grow = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
            h *= std::clamp(grow, 0.2, 5.0);
            if (std::abs(theta) >= kTwoPi) break;
        } else {
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        }
        if (h < 1e-300) throw IntegrationError("first_return_time: step underflow", t);
    }
    if (std::abs(theta) < kTwoPi)
        throw IntegrationError("first_return_time: no return detected", t);

    // bisect within the bracketing step on fresh sub-integrations
    double lo = 0.0, hi = t - t_prev;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * t; ++it) {
        const double mid = 0.5 * (lo + hi);
        double reached = std::abs(theta_prev);
        if (mid > 0.0) {
            const double seg_times[2] = {t_prev, t_prev + mid};
            const std::vector<Vec> vals = rk45_at_nodes(rhs, seg_times, u_prev, tol);
            double delta = angle_of(vals.back()) - angle_of(u_prev);
            if (delta > 3.141592653589793) delta -= kTwoPi;
            if (delta < -3.141592653589793) delta += kTwoPi;
            reached = std::abs(theta_prev + delta);
        }
        (reached >= kTwoPi ? hi : lo) = mid;
    }
    return t_prev + 0.5 * (lo + hi);
}

}  // namespace rimpact
