#pragma once

#include <cstdint>
#include <vector>

#include "rimpact/scenario.hpp"
#include "rimpact/space.hpp"

namespace rimpact {

struct ResidualReport {
    double ode_residual_sup = 0.0;  // max over segment-interior nodes of |u' - J grad H|
    std::vector<std::vector<double>> jump_residuals;  // per orbit, per impulse
    double jump_residual_max = 0.0;
    double boundary_residual = 0.0;  // max over orbits of |u(0)| + |u(T)|
    bool pairing_evaluated = false;
    double pairing_max = 0.0;  // max |(chi'(v), h_i)| over the battery

    bool pass(const Tolerances& tol) const;
};

// Residual classes of a candidate mild solution u. When v is supplied the
// derivative pairing battery is evaluated as well.
ResidualReport residuals(const EnsembleProcess& u, const Scenario& scenario,
                         std::span<const SampleOrbit> orbits,
                         const EnsembleProcess* v = nullptr, int battery_size = 16,
                         std::uint64_t seed = 4242);

// max_i |(chi'(v), h_i)| over a battery of smooth random Dirichlet test
// functions, each normalized to unit PC1 norm.
double pairing_battery(const EnsembleProcess& v, const Scenario& scenario,
                       std::span<const SampleOrbit> orbits, int n_tests,
                       std::uint64_t seed);

}  // namespace rimpact
