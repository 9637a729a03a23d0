#include "rimpact/verify.hpp"

#include <algorithm>
#include <cmath>

#include "rimpact/action.hpp"
#include "rimpact/rng.hpp"

namespace rimpact {

bool ResidualReport::pass(const Tolerances& tol) const {
    if (ode_residual_sup > tol.ode) return false;
    if (jump_residual_max > tol.jump) return false;
    if (boundary_residual > tol.boundary) return false;
    if (pairing_evaluated && pairing_max > tol.pairing) return false;
    return true;
}

ResidualReport residuals(const EnsembleProcess& u, const Scenario& scenario,
                         std::span<const SampleOrbit> orbits, const EnsembleProcess* v,
                         int battery_size, std::uint64_t seed) {
    detail::check_process_orbits(u, orbits);
    ResidualReport report;
    Vec grad(static_cast<std::size_t>(u.dim));
    Vec rhs(static_cast<std::size_t>(u.dim));
    for (int o = 0; o < u.n_orbits(); ++o) {
        const OrbitPath& path = u.orbits[static_cast<std::size_t>(o)];
        const SampleOrbit& orbit = orbits[static_cast<std::size_t>(o)];
        const int n = path.grid.node_count();
        std::vector<double> udot(static_cast<std::size_t>(n) * u.dim, 0.0);
        apply_derivative(path.grid, path.values, u.dim, udot);
        for (const Segment& seg : path.grid.segments) {
            for (int i = seg.begin + 1; i + 1 < seg.end; ++i) {
                const double t = path.grid.times[static_cast<std::size_t>(i)];
                h_grad(scenario.hamiltonian, t, path.node(i), grad);
                apply_j(grad, rhs);
                double r2 = 0.0;
                for (int c = 0; c < u.dim; ++c) {
                    const double d =
                        udot[static_cast<std::size_t>(i) * u.dim + c] -
                        rhs[static_cast<std::size_t>(c)];
                    r2 += d * d;
                }
                report.ode_residual_sup = std::max(report.ode_residual_sup, std::sqrt(r2));
            }
        }
        std::vector<double> jumps;
        for (std::size_t j = 0; j < orbit.jumps.size(); ++j) {
            const int left = path.grid.impulse_left[j];
            double r2 = 0.0;
            for (int c = 0; c < u.dim; ++c) {
                // compare against fl(left + jump): exactly zero for paths
                // whose right value was stored that way
                const double d = path.values[static_cast<std::size_t>(left + 1) * u.dim + c] -
                                 (path.values[static_cast<std::size_t>(left) * u.dim + c] +
                                  orbit.jumps[j][static_cast<std::size_t>(c)]);
                r2 += d * d;
            }
            const double r = std::sqrt(r2);
            jumps.push_back(r);
            report.jump_residual_max = std::max(report.jump_residual_max, r);
        }
        report.jump_residuals.push_back(std::move(jumps));
        report.boundary_residual =
            std::max(report.boundary_residual, norm2(path.node(0)) + norm2(path.node(n - 1)));
    }
    if (v) {
        report.pairing_evaluated = true;
        report.pairing_max = pairing_battery(*v, scenario, orbits, battery_size, seed);
    }
    return report;
}

double pairing_battery(const EnsembleProcess& v, const Scenario& scenario,
                       std::span<const SampleOrbit> orbits, int n_tests, std::uint64_t seed) {
    detail::check_process_orbits(v, orbits);
    Rng rng(seed, 29);
    EnsembleProcess h = v;
    double worst = 0.0;
    for (int i = 0; i < n_tests; ++i) {
        fill_random_sines(h, 6, rng);
        const double n = nodal_sup_pc1(h);
        if (n < 1e-14) continue;
        for (OrbitPath& path : h.orbits)
            for (double& x : path.values) x /= n;
        worst = std::max(worst, std::abs(chi_pairing(v, h, scenario.hamiltonian, orbits)));
    }
    return worst;
}

}  // namespace rimpact
