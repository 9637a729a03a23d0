#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rimpact/flow.hpp"
#include "rimpact/mountain.hpp"
#include "rimpact/rng.hpp"
#include "rimpact/verify.hpp"

using namespace rimpact;

namespace {

Scenario fixed_example_scenario() {
    Scenario s = builtin_scenario("example-4.1-fixed");
    s.solver.rim_samples = 40;
    return s;
}

}  // namespace

TEST_CASE("residuals of a propagated path: exact jumps, free boundary") {
    const Scenario scenario = fixed_example_scenario();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const Vec u0 = {0.0, 0.0};
    const PiecewisePath path = propagate_orbit(scenario.hamiltonian, u0, orbits[0],
                                               scenario.grid, 1e-12);
    EnsembleProcess u;
    u.horizon = scenario.horizon;
    u.dim = scenario.dim;
    u.orbits.push_back(path.path);

    const ResidualReport report = residuals(u, scenario, orbits);
    CHECK(report.jump_residual_max == 0.0);  // applied by construction, bit-exact
    for (double r : report.jump_residuals[0]) CHECK(r == 0.0);
    // from u0 = 0 the propagated state is tiny, so the interior dynamics are mild
    CHECK(report.ode_residual_sup < 1e-6);
    // boundary picks up |u(T)|; propagation does not enforce Dirichlet
    const int last = path.path.grid.node_count() - 1;
    CHECK(report.boundary_residual ==
          doctest::Approx(norm2(path.path.node(last))).epsilon(1e-14));
    CHECK(report.boundary_residual > 0.0);
    CHECK_FALSE(report.pairing_evaluated);
}

TEST_CASE("u = 0 with nonzero jumps shows exactly the jump magnitudes") {
    const Scenario scenario = fixed_example_scenario();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const EnsembleProcess u = make_ensemble(scenario.grid, scenario.horizon, scenario.dim,
                                            orbits);
    const ResidualReport report = residuals(u, scenario, orbits);
    REQUIRE(report.jump_residuals[0].size() == orbits[0].jumps.size());
    for (std::size_t j = 0; j < orbits[0].jumps.size(); ++j)
        CHECK(report.jump_residuals[0][j] ==
              doctest::Approx(norm2(orbits[0].jumps[j])).epsilon(1e-15));
}

TEST_CASE("pairing battery vanishes at v = 0 without impulses") {
    Scenario scenario = builtin_scenario("quadratic-small-T");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const EnsembleProcess v = make_ensemble(scenario.grid, scenario.horizon, scenario.dim,
                                            orbits);
    CHECK(pairing_battery(v, scenario, orbits, 12, 3) <= 1e-14);
}

TEST_CASE("battery magnitude is stable under reseeding") {
    const Scenario scenario = fixed_example_scenario();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    EnsembleProcess v = make_ensemble(scenario.grid, scenario.horizon, scenario.dim, orbits);
    Rng rng(31, 0);
    fill_random_sines(v, 5, rng);
    const double a = pairing_battery(v, scenario, orbits, 16, 101);
    const double b = pairing_battery(v, scenario, orbits, 16, 202);
    CHECK(a > 0.0);
    CHECK(b > 0.0);
    CHECK(a / b < 5.0);
    CHECK(b / a < 5.0);
}

TEST_CASE("theorem 2.7 consistency on the quadratic scenario") {
    const Scenario scenario = builtin_scenario("quadratic-small-T");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const MountainPassResult result = find_critical_point(scenario);
    REQUIRE(result.converged);

    // forward: small pairing battery implies small residual classes
    const double battery =
        pairing_battery(result.v_star, scenario, orbits, 16, scenario.ensemble.seed);
    CHECK(battery < 10.0 * scenario.solver.gtol);
    const RecoveredU recovered = recover_u(result.v_star, scenario.hamiltonian);
    CHECK(recovered.pc_distance < 1e-3);
    const ResidualReport report =
        residuals(recovered.u_from_conjugate, scenario, orbits, &result.v_star);
    CHECK(report.ode_residual_sup < 1e-4);
    CHECK(report.boundary_residual < 1e-4);
    CHECK(report.pairing_max < 1e-4);

    // reverse: a directly solved discrete solution annihilates the battery
    const EnsembleProcess v_direct = oracles::solve_stationarity(scenario, orbits);
    CHECK(pairing_battery(v_direct, scenario, orbits, 16, scenario.ensemble.seed) < 1e-8);

    // a deliberate perturbation in one mode is loudly non-critical
    EnsembleProcess perturbed = result.v_star;
    EnsembleProcess mode = make_ensemble(scenario.grid, scenario.horizon, scenario.dim,
                                         orbits);
    fill_from_function(
        mode,
        [&](double t, std::span<double> out) {
            out[0] = 0.1 * std::sin(3.14159265358979323846 * t / scenario.horizon);
            out[1] = 0.0;
        },
        true);
    add_scaled(perturbed, 1.0, mode);
    const double perturbed_battery =
        pairing_battery(perturbed, scenario, orbits, 16, scenario.ensemble.seed);
    CHECK(perturbed_battery >= 10.0 * battery);
}

TEST_CASE("worked-example solution passes its pairing battery at the solver tolerance") {
    const Scenario scenario = builtin_scenario("example-4.1-fixed");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const MountainPassResult result = find_critical_point(scenario);
    REQUIRE(result.converged);
    const double battery =
        pairing_battery(result.v_star, scenario, orbits, 16, scenario.ensemble.seed);
    CHECK(battery < 10.0 * scenario.solver.gtol);

    const RecoveredU recovered = recover_u(result.v_star, scenario.hamiltonian);
    const ResidualReport report =
        residuals(recovered.u_from_conjugate, scenario, orbits, &result.v_star);
    // the two mild-solution formulas satisfy the dynamics and the jumps; the
    // boundary misfit is the integration constant the dual route leaves free
    CHECK(report.ode_residual_sup < scenario.tolerances.ode);
    CHECK(report.jump_residual_max < 1e-6);
    CHECK(report.boundary_residual > 0.1);
}
