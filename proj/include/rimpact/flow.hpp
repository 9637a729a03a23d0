#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rimpact/grid.hpp"
#include "rimpact/hamiltonian.hpp"
#include "rimpact/impulse.hpp"
#include "rimpact/space.hpp"
#include "rimpact/vec.hpp"

namespace rimpact {

using Rhs = std::function<void(double, std::span<const double>, std::span<double>)>;

struct IntegrationError : std::runtime_error {
    double t_last;
    IntegrationError(const std::string& msg, double t) : std::runtime_error(msg), t_last(t) {}
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    double min_step = 0.0;
};

// Dormand-Prince 5(4) with absolute/relative control at `tol`; lands exactly
// on each requested time. `times` must be strictly increasing with u0 given
// at times.front(). Returns the state at every entry of `times`.
std::vector<Vec> rk45_at_nodes(const Rhs& rhs, std::span<const double> times,
                               std::span<const double> u0, double tol,
                               StepStats* stats = nullptr,
                               long step_budget = 50'000'000);

// Fixed-step implicit midpoint (symplectic alternative for drift studies).
std::vector<Vec> implicit_midpoint_at_nodes(const Rhs& rhs, std::span<const double> times,
                                            std::span<const double> u0,
                                            int substeps_per_interval = 1);

Rhs hamiltonian_rhs(const HamiltonianSpec& spec);

struct SegmentResult {
    std::vector<Vec> at_nodes;  // one state per requested node
    StepStats stats;
    double energy_drift = 0.0;  // |H(u(t1)) - H(u(t0))| for autonomous specs
};

// Integrates u' = J grad H(t, u) over [t0, t1] with dense output at `nodes`
// (defaults to just the endpoints).
SegmentResult integrate_segment(const HamiltonianSpec& spec, std::span<const double> u0,
                                double t0, double t1, double tol,
                                std::span<const double> nodes = {});

struct PiecewisePath {
    OrbitPath path;
    std::vector<double> segment_drift;
    StepStats stats;
};

// Initial-value propagation through a sample orbit: smooth flow between
// impulses, Delta_j added exactly at each xi_j. Dirichlet is not enforced.
PiecewisePath propagate_orbit(const HamiltonianSpec& spec, std::span<const double> u0,
                              const SampleOrbit& orbit, const GridSpec& grid, double tol,
                              long step_budget = 50'000'000);

// Per-segment max |H(u(t)) - H(u(segment start))| from the stored nodes.
std::vector<double> energy_drift(const PiecewisePath& path, const HamiltonianSpec& spec);

// First return time to the start point for the flow launched at radius*e_1;
// measured by unwrapping the phase in the span{u0, J u0} plane.
double first_return_time(const HamiltonianSpec& spec, double radius, int dim = 2,
                         double tol = 1e-12);

}  // namespace rimpact
