#include "rimpact/mountain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "rimpact/flow.hpp"
#include "rimpact/rng.hpp"

namespace rimpact {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

double chi_value_orbit(const OrbitPath& v, const HamiltonianSpec& spec,
                       const SampleOrbit& orbit) {
    EnsembleProcess wrap;
    wrap.horizon = orbit.horizon;
    wrap.dim = v.dim;
    wrap.orbits.push_back(v);
    return chi_value(wrap, spec, std::span<const SampleOrbit>(&orbit, 1));
}

// Dirichlet-windowed rotating loop sin(pi t/T) (cos(2 pi t/T) e + sin(2 pi t/T) J e).
// The plain rotating loop has |v1(0)| = |e| != 0, so the window keeps the far
// endpoint admissible while preserving the negative quadratic symplectic term.
void fill_windowed_loop(EnsembleProcess& x, std::span<const double> e) {
    const Vec je = apply_j_copy(e);
    const double horizon = x.horizon;
    fill_from_function(
        x,
        [&, horizon](double t, std::span<double> out) {
            const double window = std::sin(kPi * t / horizon);
            const double c = std::cos(kTwoPi * t / horizon);
            const double s = std::sin(kTwoPi * t / horizon);
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = window * (c * e[i] + s * je[i]);
        },
        true);
}

// Minimal element of the affine search space: staircase carrying the
// prescribed jumps of v plus a linear ramp restoring v(T) = 0.
OrbitPath jump_staircase(const OrbitGrid& grid, int dim, const SampleOrbit& orbit) {
    OrbitPath path;
    path.grid = grid;
    path.dim = dim;
    path.values.assign(static_cast<std::size_t>(grid.node_count()) * dim, 0.0);
    if (orbit.jumps.empty()) return path;

    std::vector<Vec> deltas;
    Vec total(static_cast<std::size_t>(dim), 0.0);
    for (const Vec& b : orbit.jumps) {
        Vec d = apply_j_copy(b);
        scale_inplace(d, -1.0);  // jump of v: J dv = b  =>  dv = -J b
        axpy(1.0, d, total);
        deltas.push_back(std::move(d));
    }
    Vec prefix(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t s = 0; s < grid.segments.size(); ++s) {
        if (s > 0) axpy(1.0, deltas[s - 1], prefix);
        const Segment& seg = grid.segments[s];
        for (int i = seg.begin; i < seg.end; ++i) {
            const double ramp = grid.times[static_cast<std::size_t>(i)] / grid.horizon;
            auto node = path.node(i);
            for (int c = 0; c < dim; ++c)
                node[static_cast<std::size_t>(c)] =
                    prefix[static_cast<std::size_t>(c)] -
                    ramp * total[static_cast<std::size_t>(c)];
        }
    }
    // exact Dirichlet endpoints
    std::fill(path.node(0).begin(), path.node(0).end(), 0.0);
    const int last = grid.node_count() - 1;
    std::fill(path.node(last).begin(), path.node(last).end(), 0.0);
    return path;
}

// Search-space bookkeeping: boundary nodes are fixed, impulse pairs move as
// one (prescribed jump), every other node is free. Nodes whose segments sit
// below the resolution floor are frozen at their start values: their
// quadrature mass is negligible but their inverse weights would wreck the
// conditioning of the discrete metric.
struct ReducedSpace {
    int dim = 2;
    std::vector<std::array<int, 2>> dofs;  // {node, partner or -1}
    std::vector<double> w;                 // combined quadrature weight per dof
    int frozen = 0;

    int count() const { return static_cast<int>(dofs.size()); }
    std::size_t flat() const { return dofs.size() * static_cast<std::size_t>(dim); }

    static ReducedSpace build(const OrbitGrid& grid, int dim) {
        ReducedSpace rs;
        rs.dim = dim;
        std::vector<bool> is_right(static_cast<std::size_t>(grid.node_count()), false);
        std::vector<bool> is_left(static_cast<std::size_t>(grid.node_count()), false);
        for (int node : grid.impulse_left) {
            is_left[static_cast<std::size_t>(node)] = true;
            is_right[static_cast<std::size_t>(node + 1)] = true;
        }
        double widest = 0.0;
        for (const Segment& seg : grid.segments) widest = std::max(widest, seg.spacing);
        const double floor = widest * 5e-2;
        std::vector<double> node_spacing(static_cast<std::size_t>(grid.node_count()), 0.0);
        for (std::size_t si = 0; si < grid.segments.size(); ++si)
            for (int i = grid.segments[si].begin; i < grid.segments[si].end; ++i)
                node_spacing[static_cast<std::size_t>(i)] = grid.segments[si].spacing;
        for (int i = 1; i + 1 < grid.node_count(); ++i) {
            if (is_right[static_cast<std::size_t>(i)]) continue;
            const bool pair = is_left[static_cast<std::size_t>(i)];
            double support = node_spacing[static_cast<std::size_t>(i)];
            if (pair) support = std::max(support, node_spacing[static_cast<std::size_t>(i + 1)]);
            if (support < floor) {
                ++rs.frozen;
                continue;
            }
            if (pair) {
                rs.dofs.push_back({i, i + 1});
                rs.w.push_back(grid.weights[static_cast<std::size_t>(i)] +
                               grid.weights[static_cast<std::size_t>(i + 1)]);
            } else {
                rs.dofs.push_back({i, -1});
                rs.w.push_back(grid.weights[static_cast<std::size_t>(i)]);
            }
        }
        return rs;
    }

    void reduce(std::span<const double> r_full, std::vector<double>& r_red) const {
        r_red.assign(flat(), 0.0);
        for (int k = 0; k < count(); ++k) {
            const auto [n1, n2] = dofs[static_cast<std::size_t>(k)];
            for (int c = 0; c < dim; ++c) {
                double v = r_full[static_cast<std::size_t>(n1) * dim + c];
                if (n2 >= 0) v += r_full[static_cast<std::size_t>(n2) * dim + c];
                r_red[static_cast<std::size_t>(k) * dim + c] = v;
            }
        }
    }

    void expand_add(std::span<const double> d_red, double alpha,
                    std::vector<double>& values) const {
        for (int k = 0; k < count(); ++k) {
            const auto [n1, n2] = dofs[static_cast<std::size_t>(k)];
            for (int c = 0; c < dim; ++c) {
                const double d = alpha * d_red[static_cast<std::size_t>(k) * dim + c];
                values[static_cast<std::size_t>(n1) * dim + c] += d;
                if (n2 >= 0) values[static_cast<std::size_t>(n2) * dim + c] += d;
            }
        }
    }

    double metric_dot(std::span<const double> a, std::span<const double> b) const {
        std::vector<double> terms(static_cast<std::size_t>(count()), 0.0);
        for (int k = 0; k < count(); ++k) {
            double s = 0.0;
            for (int c = 0; c < dim; ++c)
                s += a[static_cast<std::size_t>(k) * dim + c] *
                     b[static_cast<std::size_t>(k) * dim + c];
            terms[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k)] * s;
        }
        return pairwise_sum(terms);
    }

    // Riesz representative of a reduced covector and its norm.
    double riesz(const std::vector<double>& r_red, std::vector<double>& g_red) const {
        g_red.assign(flat(), 0.0);
        std::vector<double> terms(static_cast<std::size_t>(count()), 0.0);
        for (int k = 0; k < count(); ++k) {
            const double wk = w[static_cast<std::size_t>(k)];
            double s = 0.0;
            for (int c = 0; c < dim; ++c) {
                const double r = r_red[static_cast<std::size_t>(k) * dim + c];
                g_red[static_cast<std::size_t>(k) * dim + c] = r / wk;
                s += r * r;
            }
            terms[static_cast<std::size_t>(k)] = s / wk;
        }
        return std::sqrt(pairwise_sum(terms));
    }
};

struct OrbitProblem {
    const HamiltonianSpec* spec;
    const SampleOrbit* orbit;
    ReducedSpace space;

    double chi(const OrbitPath& v) const { return chi_value_orbit(v, *spec, *orbit); }

    // reduced covector of chi at v; returns the search-space gradient norm
    double gradient(const OrbitPath& v, std::vector<double>& r_red,
                    std::vector<double>& g_red) const {
        std::vector<double> r_full;
        detail::chi_covector_orbit(v, *spec, *orbit, r_full);
        space.reduce(r_full, r_red);
        return space.riesz(r_red, g_red);
    }
};

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

// Solves (A + lambda diag(A)) s = -g in place by Cholesky with a diagonal
// bump fallback. A is symmetric positive semidefinite, row-major n x n.
bool damped_cholesky_solve(std::vector<double> a, int n, double lambda,
                           const std::vector<double>& g, std::vector<double>& s) {
    for (int i = 0; i < n; ++i) {
        double& d = a[static_cast<std::size_t>(i) * n + i];
        d *= 1.0 + lambda;
        d += 1e-300;
    }
    // in-place Cholesky, lower triangle
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                sum -= a[static_cast<std::size_t>(i) * n + k] *
                       a[static_cast<std::size_t>(j) * n + k];
            if (i == j) {
                if (!(sum > 0.0)) return false;
                a[static_cast<std::size_t>(i) * n + i] = std::sqrt(sum);
            } else {
                a[static_cast<std::size_t>(i) * n + j] =
                    sum / a[static_cast<std::size_t>(j) * n + j];
            }
        }
    }
    s.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double sum = -g[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k)
            sum -= a[static_cast<std::size_t>(i) * n + k] * s[static_cast<std::size_t>(k)];
        s[static_cast<std::size_t>(i)] = sum / a[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double sum = s[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k)
            sum -= a[static_cast<std::size_t>(k) * n + i] * s[static_cast<std::size_t>(k)];
        s[static_cast<std::size_t>(i)] = sum / a[static_cast<std::size_t>(i) * n + i];
    }
    return true;
}

// Levenberg-Marquardt on the reduced stationarity residual r(z) = 0,
// minimizing 1/2 ||grad chi||^2 in the discrete Riesz metric. Plain descent
// with a line search stalls on the p < 2 conjugate term (its Hessian blows up
// wherever |v'| approaches 0), so the damped direct solve is used instead;
// the gradient norm still decreases monotonically.
void refine_lm(const OrbitProblem& prob, OrbitPath& z, const SolverOptions& opts,
               int iteration_budget, OrbitTrace& trace) {
    const int n = static_cast<int>(prob.space.flat());
    const std::vector<double>& w_dof = prob.space.w;
    const int dim = prob.space.dim;
    const auto weight_of = [&](int flat_index) {
        return w_dof[static_cast<std::size_t>(flat_index / dim)];
    };

    std::vector<double> r, g_unused, r_col, jac, normal, grad, step;
    double gn = prob.gradient(z, r, g_unused);
    double lambda = 1e-3;
    double stall_reference = gn;
    int stall_marker = 0;

    for (int it = 0; it < iteration_budget && trace.iterations < opts.max_iterations;) {
        if (gn < opts.gtol) {
            trace.converged = true;
            break;
        }
        if (it - stall_marker >= 200) {
            if (gn > 0.99 * stall_reference) break;  // no real progress: abandon this start
            stall_reference = gn;
            stall_marker = it;
        }
        // central-difference Jacobian of the reduced covector, column-major
        jac.assign(static_cast<std::size_t>(n) * n, 0.0);
        const double znorm = max_abs(z.values);
        const double h = 1e-6 * (1.0 + znorm);
        std::vector<double> unit(static_cast<std::size_t>(n), 0.0);
        std::vector<double> r_minus;
        for (int k = 0; k < n; ++k) {
            unit[static_cast<std::size_t>(k)] = 1.0;
            OrbitPath trial = z;
            prob.space.expand_add(unit, h, trial.values);
            prob.gradient(trial, r_col, g_unused);
            trial = z;
            prob.space.expand_add(unit, -h, trial.values);
            prob.gradient(trial, r_minus, g_unused);
            unit[static_cast<std::size_t>(k)] = 0.0;
            double* col = jac.data() + static_cast<std::size_t>(k) * n;
            for (int i = 0; i < n; ++i)
                col[i] = (r_col[static_cast<std::size_t>(i)] -
                          r_minus[static_cast<std::size_t>(i)]) /
                         (2.0 * h);
        }

        // normal matrix J^T W^{-1} J and gradient J^T W^{-1} r
        normal.assign(static_cast<std::size_t>(n) * n, 0.0);
        grad.assign(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            const double* ci = jac.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j <= i; ++j) {
                const double* cj = jac.data() + static_cast<std::size_t>(j) * n;
                double sum = 0.0;
                for (int k = 0; k < n; ++k) sum += ci[k] * cj[k] / weight_of(k);
                normal[static_cast<std::size_t>(i) * n + j] = sum;
                normal[static_cast<std::size_t>(j) * n + i] = sum;
            }
            double sum = 0.0;
            for (int k = 0; k < n; ++k) sum += ci[k] * r[static_cast<std::size_t>(k)] / weight_of(k);
            grad[static_cast<std::size_t>(i)] = sum;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 40 && it < iteration_budget; ++attempt) {
            ++it;
            ++trace.iterations;
            if (!damped_cholesky_solve(normal, n, lambda, grad, step)) {
                lambda = std::max(1e-12, lambda) * 10.0;
                continue;
            }
            OrbitPath trial = z;
            prob.space.expand_add(step, 1.0, trial.values);
            std::vector<double> r_trial;
            const double gn_trial = prob.gradient(trial, r_trial, g_unused);
            if (gn_trial < gn) {
                z = trial;
                r.swap(r_trial);
                gn = gn_trial;
                lambda = std::max(1e-12, lambda * 0.3);
                accepted = true;
                trace.refine_history.emplace_back(trace.iterations, prob.chi(z));
                break;
            }
            lambda = std::max(1e-12, lambda) * 4.0;
            if (lambda > 1e12) break;
        }
        if (!accepted) break;  // stalled: local minimum of the gradient norm
    }
    trace.gradient_norm = gn;
    if (gn < opts.gtol) trace.converged = true;
}

struct OrbitSearchOutcome {
    OrbitPath v;
    OrbitTrace trace;
    double chi_v1 = 0.0;
    double minimax_level = 0.0;
};

// Small dense LU solve with partial pivoting (shooting Jacobians).
bool lu_solve(std::vector<double> a, int n, std::vector<double>& rhs) {
    std::vector<int> piv(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) piv[static_cast<std::size_t>(i)] = i;
    for (int col = 0; col < n; ++col) {
        int best = col;
        double best_abs = std::abs(a[static_cast<std::size_t>(col) * n + col]);
        for (int row = col + 1; row < n; ++row) {
            const double v = std::abs(a[static_cast<std::size_t>(row) * n + col]);
            if (v > best_abs) {
                best = row;
                best_abs = v;
            }
        }
        if (best_abs < 1e-300) return false;
        if (best != col) {
            for (int k = 0; k < n; ++k)
                std::swap(a[static_cast<std::size_t>(col) * n + k],
                          a[static_cast<std::size_t>(best) * n + k]);
            std::swap(rhs[static_cast<std::size_t>(col)], rhs[static_cast<std::size_t>(best)]);
        }
        for (int row = col + 1; row < n; ++row) {
            const double f =
                a[static_cast<std::size_t>(row) * n + col] / a[static_cast<std::size_t>(col) * n + col];
            a[static_cast<std::size_t>(row) * n + col] = 0.0;
            for (int k = col + 1; k < n; ++k)
                a[static_cast<std::size_t>(row) * n + k] -= f * a[static_cast<std::size_t>(col) * n + k];
            rhs[static_cast<std::size_t>(row)] -= f * rhs[static_cast<std::size_t>(col)];
        }
    }
    for (int row = n - 1; row >= 0; --row) {
        double sum = rhs[static_cast<std::size_t>(row)];
        for (int k = row + 1; k < n; ++k)
            sum -= a[static_cast<std::size_t>(row) * n + k] * rhs[static_cast<std::size_t>(k)];
        rhs[static_cast<std::size_t>(row)] = sum / a[static_cast<std::size_t>(row) * n + row];
    }
    return true;
}

// Structured warm start: a closing orbit u(T; u0) = u0 of the impulsive flow
// gives v = -J (u - u0), which satisfies the constrained stationarity
// conditions up to discretization error. Found by damped Newton shooting over
// a deterministic ladder of seeds; returns nothing if no seed closes.
std::optional<OrbitPath> closing_orbit_guess(const Scenario& scenario, const SampleOrbit& orbit,
                                             const OrbitGrid& grid) {
    const int dim = scenario.dim;
    const double tol_int = std::min(scenario.tolerances.integrator, 1e-12);
    const auto propagate_end = [&](const Vec& u0) -> std::optional<Vec> {
        try {
            const PiecewisePath path = propagate_orbit(scenario.hamiltonian, u0, orbit,
                                                       scenario.grid, tol_int, 400'000);
            Vec end(path.path.node(path.path.grid.node_count() - 1).begin(),
                    path.path.node(path.path.grid.node_count() - 1).end());
            return end;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    };

    std::vector<Vec> seeds;
    for (double radius : {0.0, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0, 1.5}) {
        for (int a = 0; a < (radius == 0.0 ? 1 : 6); ++a) {
            Vec seed(static_cast<std::size_t>(dim), 0.0);
            const double angle = 1.0471975511965976 * a + 0.3;
            seed[0] = radius * std::cos(angle);
            seed[1] = radius * std::sin(angle);
            seeds.push_back(std::move(seed));
        }
    }

    for (const Vec& seed : seeds) {
        Vec u0 = seed;
        auto end = propagate_end(u0);
        if (!end) continue;
        Vec f(static_cast<std::size_t>(dim));
        for (int c = 0; c < dim; ++c) f[static_cast<std::size_t>(c)] = (*end)[static_cast<std::size_t>(c)] - u0[static_cast<std::size_t>(c)];
        double fn = norm2(f);
        bool converged = false;
        // the shooting map carries the integrator noise, so accept at that level
        const double shoot_tol = 2e3 * tol_int;
        for (int it = 0; it < 40; ++it) {
            if (fn < shoot_tol * (1.0 + norm2(u0))) {
                converged = true;
                break;
            }
            // forward-difference Jacobian of the shooting map
            std::vector<double> jac(static_cast<std::size_t>(dim) * dim, 0.0);
            const double h = 1e-7 * (1.0 + norm2(u0));
            bool jac_ok = true;
            for (int k = 0; k < dim; ++k) {
                Vec up = u0;
                up[static_cast<std::size_t>(k)] += h;
                auto end_p = propagate_end(up);
                if (!end_p) {
                    jac_ok = false;
                    break;
                }
                for (int c = 0; c < dim; ++c)
                    jac[static_cast<std::size_t>(c) * dim + k] =
                        ((*end_p)[static_cast<std::size_t>(c)] - up[static_cast<std::size_t>(c)] -
                         f[static_cast<std::size_t>(c)]) /
                        h;
            }
            if (!jac_ok) break;
            std::vector<double> step(f.begin(), f.end());
            if (!lu_solve(jac, dim, step)) break;
            bool moved = false;
            for (double damp = 1.0; damp > 1e-6; damp *= 0.5) {
                Vec trial = u0;
                for (int c = 0; c < dim; ++c)
                    trial[static_cast<std::size_t>(c)] -= damp * step[static_cast<std::size_t>(c)];
                auto end_t = propagate_end(trial);
                if (!end_t) continue;
                Vec ft(static_cast<std::size_t>(dim));
                for (int c = 0; c < dim; ++c)
                    ft[static_cast<std::size_t>(c)] =
                        (*end_t)[static_cast<std::size_t>(c)] - trial[static_cast<std::size_t>(c)];
                if (norm2(ft) < fn) {
                    u0 = trial;
                    f = ft;
                    fn = norm2(f);
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        if (!converged) continue;

        const PiecewisePath closed =
            propagate_orbit(scenario.hamiltonian, u0, orbit, scenario.grid, tol_int);
        OrbitPath v;
        v.grid = grid;
        v.dim = dim;
        v.values.assign(static_cast<std::size_t>(grid.node_count()) * dim, 0.0);
        Vec shifted(static_cast<std::size_t>(dim));
        for (int i = 0; i < grid.node_count(); ++i) {
            const auto ui = closed.path.node(i);
            for (int c = 0; c < dim; ++c)
                shifted[static_cast<std::size_t>(c)] =
                    ui[static_cast<std::size_t>(c)] - u0[static_cast<std::size_t>(c)];
            apply_j(shifted, v.node(i));
            for (double& x : v.node(i)) x = -x;
        }
        std::fill(v.node(0).begin(), v.node(0).end(), 0.0);
        const int last = grid.node_count() - 1;
        std::fill(v.node(last).begin(), v.node(last).end(), 0.0);
        return v;
    }
    return std::nullopt;
}

OrbitSearchOutcome search_orbit(const Scenario& scenario, const SampleOrbit& orbit,
                                const OrbitGrid& grid, double e_norm_hint,
                                bool push_negative) {
    const SolverOptions& opts = scenario.solver;
    const HamiltonianSpec& spec = scenario.hamiltonian;
    OrbitProblem prob{&spec, &orbit, ReducedSpace::build(grid, scenario.dim)};

    OrbitSearchOutcome out;

    // path endpoints: staircase (carries the jumps) and staircase + loop
    OrbitPath base = jump_staircase(grid, scenario.dim, orbit);
    Vec e(static_cast<std::size_t>(scenario.dim), 0.0);
    const Vec dir = scenario.impulse_spec().unit_direction();

    EnsembleProcess loop;
    loop.horizon = scenario.horizon;
    loop.dim = scenario.dim;
    loop.orbits.push_back(base);  // grid carrier
    double e_norm = std::max(e_norm_hint, 1e-6);
    OrbitPath endpoint = base;
    double chi_end = 0.0;
    for (int tries = 0;; ++tries) {
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = e_norm * dir[i];
        fill_windowed_loop(loop, e);
        endpoint = base;
        for (std::size_t i = 0; i < endpoint.values.size(); ++i)
            endpoint.values[i] += loop.orbits[0].values[i];
        chi_end = prob.chi(endpoint);
        if (!push_negative || chi_end < 0.0 || e_norm >= opts.e_norm_cap || tries >= 60) break;
        e_norm *= 2.0;
    }
    out.chi_v1 = chi_end;

    // discrete path, linear in the loop amplitude
    const int P = opts.path_nodes;
    std::vector<OrbitPath> path(static_cast<std::size_t>(P), base);
    for (int s = 0; s < P; ++s) {
        const double frac = static_cast<double>(s) / (P - 1);
        for (std::size_t i = 0; i < base.values.size(); ++i)
            path[static_cast<std::size_t>(s)].values[i] += frac * loop.orbits[0].values[i];
    }

    std::vector<double> chi_cache(static_cast<std::size_t>(P), 0.0);
    for (int s = 0; s < P; ++s)
        chi_cache[static_cast<std::size_t>(s)] = prob.chi(path[static_cast<std::size_t>(s)]);

    OrbitTrace& trace = out.trace;
    std::vector<double> r_red, g_red;
    int best_node = 0;
    const int path_budget = std::min(opts.path_iterations, opts.max_iterations);
    for (int it = 0; it < path_budget; ++it) {
        int m = 0;
        for (int s = 1; s < P; ++s)
            if (chi_cache[static_cast<std::size_t>(s)] >
                chi_cache[static_cast<std::size_t>(m)] + 1e-12)
                m = s;
        best_node = m;
        trace.path_history.emplace_back(trace.iterations, chi_cache[static_cast<std::size_t>(m)]);
        if (m == 0 || m == P - 1) break;  // endpoint dominates: hand to refinement

        ++trace.iterations;
        OrbitPath& vm = path[static_cast<std::size_t>(m)];
        const double gn = prob.gradient(vm, r_red, g_red);
        if (gn < opts.gtol) {
            trace.converged = true;
            break;
        }
        const double slope = -gn * gn;
        double alpha = opts.armijo_init;
        const double chi0 = chi_cache[static_cast<std::size_t>(m)];
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            OrbitPath trial = vm;
            prob.space.expand_add(g_red, -alpha, trial.values);
            const double chi_trial = prob.chi(trial);
            if (chi_trial <= chi0 + opts.armijo_slope * alpha * slope) {
                vm = trial;
                chi_cache[static_cast<std::size_t>(m)] = chi_trial;
                moved = true;
                break;
            }
            alpha *= opts.armijo_shrink;
        }
        if (!moved) break;  // descent stalled at this resolution

        if (opts.redistribute_every > 0 && (it + 1) % opts.redistribute_every == 0) {
            // redistribute nodes by arc length of the piecewise-linear path
            std::vector<double> cumulative(static_cast<std::size_t>(P), 0.0);
            for (int s = 1; s < P; ++s) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < base.values.size(); ++i) {
                    const double d = path[static_cast<std::size_t>(s)].values[i] -
                                     path[static_cast<std::size_t>(s - 1)].values[i];
                    d2 += d * d;
                }
                cumulative[static_cast<std::size_t>(s)] =
                    cumulative[static_cast<std::size_t>(s - 1)] + std::sqrt(d2);
            }
            const double total = cumulative.back();
            if (total > 0.0) {
                std::vector<OrbitPath> fresh = path;
                for (int s = 1; s + 1 < P; ++s) {
                    const double target = total * s / (P - 1);
                    int seg = 1;
                    while (seg < P - 1 && cumulative[static_cast<std::size_t>(seg)] < target)
                        ++seg;
                    const double lo = cumulative[static_cast<std::size_t>(seg - 1)];
                    const double hi = cumulative[static_cast<std::size_t>(seg)];
                    const double w = hi > lo ? (target - lo) / (hi - lo) : 0.0;
                    OrbitPath& dst = fresh[static_cast<std::size_t>(s)];
                    for (std::size_t i = 0; i < dst.values.size(); ++i)
                        dst.values[i] =
                            (1.0 - w) * path[static_cast<std::size_t>(seg - 1)].values[i] +
                            w * path[static_cast<std::size_t>(seg)].values[i];
                }
                std::vector<double> fresh_chi(static_cast<std::size_t>(P), 0.0);
                double old_max = chi_cache[0], new_max = 0.0;
                for (int s = 0; s < P; ++s) {
                    fresh_chi[static_cast<std::size_t>(s)] =
                        prob.chi(fresh[static_cast<std::size_t>(s)]);
                    old_max = std::max(old_max, chi_cache[static_cast<std::size_t>(s)]);
                    new_max = std::max(new_max, fresh_chi[static_cast<std::size_t>(s)]);
                }
                if (new_max <= old_max + 1e-12) {
                    path.swap(fresh);
                    chi_cache.swap(fresh_chi);
                }
            }
        }
    }

    int m = 0;
    for (int s = 1; s < P; ++s)
        if (chi_cache[static_cast<std::size_t>(s)] > chi_cache[static_cast<std::size_t>(m)])
            m = s;
    best_node = m;
    out.minimax_level = chi_cache[static_cast<std::size_t>(m)];
    out.v = path[static_cast<std::size_t>(best_node)];
    if (trace.converged) {
        std::vector<double> r2, g2;
        trace.gradient_norm = prob.gradient(out.v, r2, g2);
        trace.chi_final = prob.chi(out.v);
        return out;
    }

    // Refinement starts: the closing-orbit warm start when shooting finds
    // one, then the max node, then the remaining path nodes in
    // decreasing-chi order. The discrete minimax level is not always
    // attained (the compactness the continuum argument would need can fail
    // in the discrete norm), so stalled starts are abandoned and the next
    // candidate is tried.
    std::vector<OrbitPath> candidates;
    if (auto guess = closing_orbit_guess(scenario, orbit, grid)) {
        candidates.push_back(std::move(*guess));
    }
    std::vector<int> starts(static_cast<std::size_t>(P));
    for (int s = 0; s < P; ++s) starts[static_cast<std::size_t>(s)] = s;
    std::sort(starts.begin(), starts.end(), [&](int a, int b) {
        return chi_cache[static_cast<std::size_t>(a)] > chi_cache[static_cast<std::size_t>(b)];
    });
    for (int start : starts) candidates.push_back(path[static_cast<std::size_t>(start)]);

    OrbitPath best = out.v;
    OrbitTrace best_trace = trace;
    best_trace.gradient_norm = std::numeric_limits<double>::infinity();
    for (const OrbitPath& start : candidates) {
        OrbitPath candidate = start;
        OrbitTrace attempt = trace;
        const int budget =
            std::min(1500, std::max(0, opts.max_iterations - attempt.iterations));
        if (budget == 0) break;
        refine_lm(prob, candidate, opts, budget, attempt);
        const double chi_c = prob.chi(candidate);
        const bool better = attempt.converged
                                ? (!best_trace.converged || chi_c > prob.chi(best))
                                : (!best_trace.converged &&
                                   attempt.gradient_norm < best_trace.gradient_norm);
        if (better) {
            best = candidate;
            best_trace = attempt;
        }
        if (attempt.converged && chi_c > 0.0) break;
    }
    out.v = best;
    trace = best_trace;
    trace.chi_final = prob.chi(out.v);
    return out;
}

}  // namespace

HypothesisReport verify_hypotheses(const Scenario& scenario, int samples, std::uint64_t seed) {
    scenario.validate();
    HypothesisReport report;
    report.samples = samples;
    const ImpulseSpec impulses = scenario.impulse_spec();
    report.b_estimate = estimate_B(impulses, scenario.ensemble.n_orbits, scenario.ensemble.seed);
    report.b_bound_available = analytic_B_bound_available(impulses);
    if (report.b_bound_available) {
        report.b_bound = analytic_B_bound(impulses);
        report.b_used = report.b_bound;
    } else {
        report.b_used = report.b_estimate.mc_mean + 3.0 * report.b_estimate.mc_stderr;
    }
    report.pass_h1 = std::isfinite(report.b_used);

    double alpha = 0.0, q = 0.0;
    report.exponents_available = scenario.hamiltonian.growth_exponents(alpha, q);
    if (!report.exponents_available) {
        report.h2_min_slack = std::numeric_limits<double>::quiet_NaN();
        report.h3_min_slack = std::numeric_limits<double>::quiet_NaN();
        report.condition_value = std::numeric_limits<double>::quiet_NaN();
        return report;
    }
    report.alpha = alpha;
    report.q = q;
    report.p = q / (q - 1.0);
    report.alpha_star = scenario.hamiltonian.alpha_star();

    Rng rng(seed, 17);
    double min_h2 = std::numeric_limits<double>::infinity();
    double min_h3 = min_h2;
    double min_h2_rel = min_h2;
    double min_h3_rel = min_h2;
    Vec u(static_cast<std::size_t>(scenario.dim));
    Vec g(static_cast<std::size_t>(scenario.dim));
    for (int i = 0; i < samples; ++i) {
        for (double& x : u) x = rng.normal();
        const double n = norm2(u);
        if (n == 0.0) continue;
        const double radius = std::exp(rng.uniform(std::log(0.05), std::log(2.0)));
        scale_inplace(u, radius / n);
        const double hu = h_value(scenario.hamiltonian, 0.0, u);
        h_grad(scenario.hamiltonian, 0.0, u, g);
        const double h2 = dot(g, u) - q * hu;
        const double h3 = alpha * std::pow(radius, q) - hu;
        min_h2 = std::min(min_h2, h2);
        min_h3 = std::min(min_h3, h3);
        min_h2_rel = std::min(min_h2_rel, h2 / std::max(1.0, std::abs(q * hu)));
        min_h3_rel = std::min(min_h3_rel, h3 / std::max(1.0, std::abs(hu)));
    }
    report.h2_min_slack = min_h2;
    report.h3_min_slack = min_h3;
    report.pass_h2 = min_h2_rel >= -1e-10;
    report.pass_h3 = min_h3_rel >= -1e-10;
    report.condition_value = (1.0 - report.p / 2.0) * report.alpha_star - 0.5 * report.b_used;
    report.pass_condition = report.condition_value > 0.0;
    return report;
}

double chi_of_loop(const Scenario& scenario, const std::vector<SampleOrbit>& orbits,
                   double e_norm) {
    EnsembleProcess v = make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
    Vec e = scenario.impulse_spec().unit_direction();
    scale_inplace(e, e_norm);
    fill_windowed_loop(v, e);
    return chi_value(v, scenario.hamiltonian, orbits);
}

double paper_loop_symplectic_integral(const GridSpec& grid, double horizon, int dim,
                                      double e_norm) {
    EnsembleProcess v = make_deterministic(grid, horizon, dim);
    Vec e(static_cast<std::size_t>(dim), 0.0);
    e[0] = e_norm;
    const Vec je = apply_j_copy(e);
    fill_from_function(
        v,
        [&](double t, std::span<double> out) {
            const double c = std::cos(kTwoPi * t / horizon);
            const double s = std::sin(kTwoPi * t / horizon);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * e[i] + s * je[i];
        },
        false);
    const EnsembleProcess dv = derivative(v);
    const OrbitPath& path = v.orbits[0];
    const OrbitPath& dpath = dv.orbits[0];
    std::vector<double> nodal(static_cast<std::size_t>(path.grid.node_count()));
    Vec jvd(static_cast<std::size_t>(dim));
    for (int i = 0; i < path.grid.node_count(); ++i) {
        apply_j(dpath.node(i), jvd);
        nodal[static_cast<std::size_t>(i)] = dot(jvd, path.node(i));
    }
    return quadrature(path.grid, nodal);
}

GeometryRecord mountain_pass_geometry(const Scenario& scenario, const KEstimate& k,
                                      const std::vector<SampleOrbit>& orbits, double b_used,
                                      std::uint64_t seed) {
    double alpha = 0.0, q = 0.0;
    if (!scenario.hamiltonian.growth_exponents(alpha, q))
        throw std::invalid_argument(
            "mountain_pass_geometry: hamiltonian exposes no growth exponents");
    const double p = q / (q - 1.0);
    const double alpha_star = scenario.hamiltonian.alpha_star();

    GeometryRecord rec;
    rec.k_lower = k.k_lower;
    rec.k_working = k.k_working;
    rec.b_used = b_used;
    rec.rho = std::pow(std::pow(k.k_working, p) / scenario.horizon, 1.0 / (p - 1.0));
    rec.rim_bound = rec.rho * ((1.0 - p / 2.0) * alpha_star - 0.5 * b_used);

    EnsembleProcess zero = make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
    rec.chi_at_zero = chi_value(zero, scenario.hamiltonian, orbits);

    Rng rng(seed, 13);
    rec.rim_samples = scenario.solver.rim_samples;
    rec.rim_min_chi = std::numeric_limits<double>::infinity();
    EnsembleProcess direction = zero;
    for (int i = 0; i < rec.rim_samples; ++i) {
        fill_random_sines(direction, 6, rng);
        const double n = nodal_sup_pc1(direction);
        if (n < 1e-14) continue;
        const EnsembleProcess v = scaled(direction, rec.rho / n);
        const double cv = chi_value(v, scenario.hamiltonian, orbits);
        rec.rim_chi.push_back(cv);
        rec.rim_min_chi = std::min(rec.rim_min_chi, cv);
    }

    double e_norm = std::max(1.0, rec.rho);
    double cv1 = chi_of_loop(scenario, orbits, e_norm);
    while (cv1 >= 0.0 && 2.0 * e_norm <= scenario.solver.e_norm_cap) {
        e_norm *= 2.0;
        cv1 = chi_of_loop(scenario, orbits, e_norm);
    }
    rec.e_norm_used = e_norm;
    rec.chi_at_v1 = cv1;
    rec.v1_negative = cv1 < 0.0;

    rec.paper_loop_integral =
        paper_loop_symplectic_integral(scenario.grid, scenario.horizon, scenario.dim, 1.0);

    rec.ok = rec.rim_min_chi > 0.0 && rec.v1_negative;
    if (!rec.v1_negative) rec.note = "chi(v1) did not become negative within the norm cap";
    else if (!(rec.rim_min_chi > 0.0)) rec.note = "sampled rim minimum is not positive";
    return rec;
}

MountainPassResult find_critical_point(const Scenario& scenario, const GeometryRecord& geometry,
                                       const std::vector<SampleOrbit>& orbits,
                                       const EnsembleProcess* initial) {
    scenario.validate();
    MountainPassResult result;
    result.geometry = geometry;
    result.v_star = make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
    result.v_star.dirichlet = true;

    if (initial) {
        result.v_star.require_compatible(*initial);
        result.v_star = *initial;
        std::vector<double> chi_vals(orbits.size(), 0.0);
        for (std::size_t o = 0; o < orbits.size(); ++o) {
            OrbitProblem prob{&scenario.hamiltonian, &orbits[o],
                              ReducedSpace::build(result.v_star.orbits[o].grid, scenario.dim)};
            OrbitTrace trace;
            std::vector<double> r_red, g_red;
            const double gn = prob.gradient(result.v_star.orbits[o], r_red, g_red);
            trace.gradient_norm = gn;
            if (gn >= scenario.solver.gtol) {
                refine_lm(prob, result.v_star.orbits[o], scenario.solver,
                          scenario.solver.max_iterations, trace);
            } else {
                trace.converged = true;
            }
            trace.chi_final = prob.chi(result.v_star.orbits[o]);
            chi_vals[o] = trace.chi_final;
            result.gradient_norm = std::max(result.gradient_norm, trace.gradient_norm);
            result.iterations = std::max(result.iterations, trace.iterations);
            result.traces.push_back(std::move(trace));
        }
        result.converged = true;
        for (const OrbitTrace& t : result.traces) result.converged &= t.converged;
        result.chi_at_vstar = pairwise_sum(chi_vals) / static_cast<double>(chi_vals.size());
        result.chi_at_v1 = geometry.chi_at_v1;
        result.pass_level_dominates =
            result.chi_at_vstar > std::max(0.0, result.chi_at_v1);
        return result;
    }

    const double e_hint = geometry.e_norm_used > 0.0 ? geometry.e_norm_used
                                                     : std::max(1.0, geometry.rho);
    std::vector<double> chi_vals(orbits.size(), 0.0);
    std::vector<double> chi_v1s(orbits.size(), 0.0);
    std::vector<double> levels(orbits.size(), 0.0);
    result.converged = true;
    for (std::size_t o = 0; o < orbits.size(); ++o) {
        OrbitSearchOutcome outcome = search_orbit(scenario, orbits[o],
                                                  result.v_star.orbits[o].grid, e_hint,
                                                  geometry.v1_negative);
        result.v_star.orbits[o].values = std::move(outcome.v.values);
        chi_vals[o] = outcome.trace.chi_final;
        chi_v1s[o] = outcome.chi_v1;
        levels[o] = outcome.minimax_level;
        result.gradient_norm = std::max(result.gradient_norm, outcome.trace.gradient_norm);
        result.iterations = std::max(result.iterations, outcome.trace.iterations);
        result.converged &= outcome.trace.converged;
        result.traces.push_back(std::move(outcome.trace));
    }
    result.chi_at_vstar = pairwise_sum(chi_vals) / static_cast<double>(chi_vals.size());
    result.chi_at_v1 = pairwise_sum(chi_v1s) / static_cast<double>(chi_v1s.size());
    result.minimax_level = pairwise_sum(levels) / static_cast<double>(levels.size());
    result.pass_level_dominates = result.chi_at_vstar > std::max(0.0, result.chi_at_v1);
    return result;
}

MountainPassResult find_critical_point(const Scenario& scenario, const EnsembleProcess* initial) {
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    GeometryRecord geometry;
    double alpha = 0.0, q = 0.0;
    if (scenario.hamiltonian.growth_exponents(alpha, q)) {
        const KEstimate k = estimate_K(scenario.grid, TrialFamily::mixed,
                                       scenario.solver.k_trials, scenario.ensemble.seed,
                                       scenario.horizon, scenario.dim,
                                       scenario.solver.k_safety);
        const ImpulseSpec impulses = scenario.impulse_spec();
        double b_used;
        if (analytic_B_bound_available(impulses)) {
            b_used = analytic_B_bound(impulses);
        } else {
            const BEstimate b = estimate_B(impulses, scenario.ensemble.n_orbits,
                                           scenario.ensemble.seed);
            b_used = b.mc_mean + 3.0 * b.mc_stderr;
        }
        geometry = mountain_pass_geometry(scenario, k, orbits, b_used, scenario.ensemble.seed);
    } else {
        geometry.ok = false;
        geometry.note = "geometry skipped: no growth exponents";
        geometry.e_norm_used = 1.0;
    }
    return find_critical_point(scenario, geometry, orbits, initial);
}

RecoveredU recover_u(const EnsembleProcess& v, const HamiltonianSpec& spec) {
    RecoveredU out;
    out.u_from_v = v;
    out.u_from_conjugate = v;
    for (std::size_t o = 0; o < v.orbits.size(); ++o) {
        const OrbitPath& path = v.orbits[o];
        OrbitPath& uv = out.u_from_v.orbits[o];
        OrbitPath& uc = out.u_from_conjugate.orbits[o];
        const int n = path.grid.node_count();
        std::vector<double> vdot(static_cast<std::size_t>(n) * path.dim, 0.0);
        apply_derivative(path.grid, path.values, path.dim, vdot);
        Vec tmp(static_cast<std::size_t>(path.dim));
        for (int i = 0; i < n; ++i) {
            apply_j(path.node(i), tmp);
            std::copy(tmp.begin(), tmp.end(), uv.node(i).begin());
            std::span<const double> vd(vdot.data() + static_cast<std::size_t>(i) * path.dim,
                                       static_cast<std::size_t>(path.dim));
            legendre_grad(spec, path.grid.times[static_cast<std::size_t>(i)], vd, tmp);
            std::copy(tmp.begin(), tmp.end(), uc.node(i).begin());
        }
    }
    out.u_from_v.dirichlet = v.dirichlet;
    out.u_from_conjugate.dirichlet = false;
    out.pc_distance = pc_norm(difference(out.u_from_v, out.u_from_conjugate));
    return out;
}

CoercivityCheck coercivity_check(const Scenario& scenario,
                                 const std::vector<SampleOrbit>& orbits, double k_working,
                                 double b_used, int samples, std::uint64_t seed) {
    double alpha = 0.0, q = 0.0;
    if (!scenario.hamiltonian.growth_exponents(alpha, q))
        throw std::invalid_argument("coercivity_check: no growth exponents");
    const double p = q / (q - 1.0);
    const double alpha_star = scenario.hamiltonian.alpha_star();
    const double factor =
        (1.0 - p / 2.0) * alpha_star * scenario.horizon / std::pow(k_working, p);

    Rng rng(seed, 23);
    CoercivityCheck check;
    check.samples = samples;
    check.min_margin = std::numeric_limits<double>::infinity();
    EnsembleProcess direction =
        make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
    for (int i = 0; i < samples; ++i) {
        fill_random_sines(direction, 6, rng);
        const double n = nodal_sup_pc1(direction);
        if (n < 1e-14) continue;
        const double target = std::exp(rng.uniform(std::log(2.0), std::log(50.0)));
        const EnsembleProcess v = scaled(direction, target / n);
        const double cv = chi_value(v, scenario.hamiltonian, orbits);
        const double bound = factor * std::pow(target, p) - 0.5 * b_used * target;
        check.min_margin = std::min(check.min_margin, cv - bound);
    }
    check.slack = std::max(0.0, -check.min_margin);
    return check;
}

}  // namespace rimpact
