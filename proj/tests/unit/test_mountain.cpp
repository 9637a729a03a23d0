#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "rimpact/mountain.hpp"
#include "rimpact/rng.hpp"
#include "rimpact/verify.hpp"

using namespace rimpact;

TEST_CASE("hypothesis report for the worked example") {
    const Scenario scenario = builtin_scenario("example-4.1");
    const HypothesisReport report = verify_hypotheses(scenario, 5000, 99);
    CHECK(report.all_pass());
    CHECK(report.b_bound == 4.0 / 9.0);
    CHECK(report.b_used == 4.0 / 9.0);
    CHECK(report.q == 10.0);
    CHECK(report.p == doctest::Approx(10.0 / 9.0).epsilon(1e-15));
    CHECK(report.alpha_star == doctest::Approx(0.696).epsilon(1e-3));
    CHECK(report.condition_value >= 0.08);
    CHECK(report.condition_value == doctest::Approx((4.0 / 9.0) * report.alpha_star -
                                                    2.0 / 9.0)
                                        .epsilon(1e-12));
    // pure powers meet the superquadraticity inequality with equality
    CHECK(std::abs(report.h2_min_slack) <= 1e-8);
    CHECK(report.h3_min_slack >= -1e-10);
}

TEST_CASE("hypothesis report is deterministic") {
    const Scenario scenario = builtin_scenario("example-4.1");
    const HypothesisReport a = verify_hypotheses(scenario, 2000, 7);
    const HypothesisReport b = verify_hypotheses(scenario, 2000, 7);
    CHECK(a.b_estimate.mc_mean == b.b_estimate.mc_mean);
    CHECK(a.h2_min_slack == b.h2_min_slack);
    CHECK(a.condition_value == b.condition_value);
}

TEST_CASE("ten-fold jumps break the size condition") {
    const Scenario scenario = builtin_scenario("example-4.1-jumps10");
    const HypothesisReport report = verify_hypotheses(scenario, 2000, 99);
    CHECK(report.b_bound == doctest::Approx(40.0 / 9.0).epsilon(1e-14));
    CHECK_FALSE(report.pass_condition);
    CHECK_FALSE(report.all_pass());
    CHECK(report.pass_h2);  // the hamiltonian itself is unchanged
}

TEST_CASE("hypotheses degrade gracefully without growth exponents") {
    const Scenario scenario = builtin_scenario("quadratic-small-T");
    const HypothesisReport report = verify_hypotheses(scenario, 100, 1);
    CHECK_FALSE(report.exponents_available);
    CHECK_FALSE(report.all_pass());
}

namespace {

Scenario fixed_scenario_for_geometry() {
    Scenario s = builtin_scenario("example-4.1-fixed");
    s.solver.rim_samples = 60;  // keep the unit test quick
    return s;
}

}  // namespace

TEST_CASE("mountain pass geometry of the fixed example orbit") {
    const Scenario scenario = fixed_scenario_for_geometry();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const KEstimate k = estimate_K(scenario.grid, TrialFamily::mixed, 24,
                                   scenario.ensemble.seed, scenario.horizon, scenario.dim);
    const GeometryRecord rec =
        mountain_pass_geometry(scenario, k, orbits, 4.0 / 9.0, scenario.ensemble.seed);

    const double p = 10.0 / 9.0;
    CHECK(rec.rho ==
          doctest::Approx(std::pow(std::pow(k.k_working, p) / scenario.horizon,
                                   1.0 / (p - 1.0)))
              .epsilon(1e-12));
    CHECK(rec.chi_at_zero == 0.0);
    CHECK(rec.rim_min_chi > 0.0);
    CHECK(static_cast<int>(rec.rim_chi.size()) == 60);
    CHECK(rec.v1_negative);
    CHECK(rec.chi_at_v1 < 0.0);
    CHECK(rec.e_norm_used >= std::max(1.0, rec.rho));
    CHECK(rec.ok);
    CHECK(rec.rim_bound > 0.0);
    CHECK(rec.paper_loop_integral < 0.0);

    // chi(v1) keeps strictly decreasing once past the sign change
    double prev = rec.chi_at_v1;
    double e_norm = rec.e_norm_used;
    for (int k2 = 0; k2 < 3; ++k2) {
        e_norm *= 2.0;
        const double next = chi_of_loop(scenario, orbits, e_norm);
        CHECK(next < prev);
        prev = next;
    }
}

TEST_CASE("geometry reports failure when the norm cap is too small") {
    Scenario scenario = fixed_scenario_for_geometry();
    scenario.solver.e_norm_cap = 2.0;
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const KEstimate k = estimate_K(scenario.grid, TrialFamily::mixed, 8,
                                   scenario.ensemble.seed, scenario.horizon, scenario.dim);
    const GeometryRecord rec =
        mountain_pass_geometry(scenario, k, orbits, 4.0 / 9.0, scenario.ensemble.seed);
    CHECK_FALSE(rec.ok);
    CHECK_FALSE(rec.v1_negative);
    CHECK_FALSE(rec.note.empty());
}

TEST_CASE("geometry requires growth exponents") {
    const Scenario scenario = builtin_scenario("quadratic-small-T");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const KEstimate k = estimate_K(scenario.grid, TrialFamily::mixed, 8, 1, scenario.horizon,
                                   scenario.dim);
    CHECK_THROWS_AS(mountain_pass_geometry(scenario, k, orbits, 0.0, 1),
                    std::invalid_argument);
}

TEST_CASE("solver matches the direct stationarity solve on the quadratic scenario") {
    const Scenario scenario = builtin_scenario("quadratic-small-T");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();

    const MountainPassResult result = find_critical_point(scenario);
    CHECK(result.converged);
    CHECK(result.gradient_norm < 1e-6);

    const EnsembleProcess v_direct = oracles::solve_stationarity(scenario, orbits);
    CHECK(pc_norm(difference(result.v_star, v_direct)) < 1e-4);

    const RecoveredU opt = recover_u(result.v_star, scenario.hamiltonian);
    const RecoveredU direct = recover_u(v_direct, scenario.hamiltonian);
    CHECK(pc_norm(difference(opt.u_from_conjugate, direct.u_from_conjugate)) < 1e-4);
    CHECK(opt.pc_distance < 1e-4);

    const ResidualReport res =
        residuals(opt.u_from_conjugate, scenario, orbits, &result.v_star);
    CHECK(res.pass(scenario.tolerances));
}

TEST_CASE("solver matches the direct solve on a quadratic scenario with one impulse") {
    Scenario scenario = builtin_scenario("quadratic-small-T");
    scenario.impulses.intervals.kind = IntervalBounds::Kind::explicit_list;
    scenario.impulses.intervals.values = {0.4};
    scenario.impulses.tau.kind = TauKind::point_mass;
    scenario.impulses.tau.fraction = 0.5;
    scenario.impulses.jumps.kind = JumpCoeffs::Kind::explicit_list;
    scenario.impulses.jumps.values = {0.8};
    scenario.validate();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    REQUIRE(orbits[0].size() == 1);

    const MountainPassResult result = find_critical_point(scenario);
    CHECK(result.converged);
    CHECK(result.gradient_norm < scenario.solver.gtol);

    const EnsembleProcess v_direct = oracles::solve_stationarity(scenario, orbits);
    const double distance = pc_norm(difference(result.v_star, v_direct));
    CHECK(pc_norm(v_direct) > 1e-2);  // genuinely nontrivial solution
    CHECK(distance < 1e-4);
}

TEST_CASE("an initial guess at the critical point needs zero iterations") {
    const Scenario scenario = builtin_scenario("quadratic-small-T");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const MountainPassResult first = find_critical_point(scenario);
    REQUIRE(first.converged);
    const MountainPassResult again =
        find_critical_point(scenario, first.geometry, orbits, &first.v_star);
    CHECK(again.converged);
    CHECK(again.iterations == 0);
}

TEST_CASE("worked-example solve: positive critical level above the loop endpoint") {
    const Scenario scenario = builtin_scenario("example-4.1-fixed");
    const MountainPassResult result = find_critical_point(scenario);
    CHECK(result.converged);
    CHECK(result.gradient_norm < scenario.solver.gtol);
    CHECK(result.chi_at_vstar > 0.0);
    CHECK(result.chi_at_v1 < 0.0);
    CHECK(result.pass_level_dominates);
    CHECK(result.geometry.ok);
    // the minimax phase never increases the max-node level
    for (const OrbitTrace& trace : result.traces) {
        for (std::size_t i = 1; i < trace.path_history.size(); ++i)
            CHECK(trace.path_history[i].second <=
                  trace.path_history[i - 1].second + 1e-12);
    }
}

TEST_CASE("recover_u on the zero field returns zero candidates") {
    SampleOrbit empty;
    empty.horizon = 1.0;
    std::vector<SampleOrbit> orbits = {empty};
    GridSpec grid;
    grid.base_nodes = 17;
    const EnsembleProcess v = make_ensemble(grid, 1.0, 2, orbits);
    const RecoveredU rec = recover_u(v, HamiltonianSpec::power_law(1.0, 10.0));
    CHECK(rec.pc_distance == 0.0);
    CHECK(pc_norm(rec.u_from_v) == 0.0);
    CHECK(pc_norm(rec.u_from_conjugate) == 0.0);
}

TEST_CASE("applying J twice negates the recovered field bit-consistently") {
    SampleOrbit empty;
    empty.horizon = 1.0;
    std::vector<SampleOrbit> orbits = {empty};
    GridSpec grid;
    grid.base_nodes = 17;
    EnsembleProcess v = make_ensemble(grid, 1.0, 2, orbits);
    Rng rng(23, 0);
    fill_random_sines(v, 3, rng);
    const RecoveredU once = recover_u(v, HamiltonianSpec::power_law(1.0, 10.0));
    const RecoveredU twice = recover_u(once.u_from_v, HamiltonianSpec::power_law(1.0, 10.0));
    for (int i = 0; i < v.orbits[0].grid.node_count(); ++i)
        for (int c = 0; c < 2; ++c)
            CHECK(twice.u_from_v.orbits[0].node(i)[static_cast<std::size_t>(c)] ==
                  -v.orbits[0].node(i)[static_cast<std::size_t>(c)]);
}

TEST_CASE("coercivity margins are reported with nonnegative slack") {
    const Scenario scenario = fixed_scenario_for_geometry();
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const CoercivityCheck check = coercivity_check(scenario, orbits, 1.05, 4.0 / 9.0, 40, 5);
    CHECK(check.samples == 40);
    CHECK(std::isfinite(check.min_margin));
    CHECK(check.slack >= 0.0);
    CHECK(check.slack == doctest::Approx(std::max(0.0, -check.min_margin)));
}

TEST_CASE("the full-space Riesz gradient is small at a converged critical point") {
    const Scenario scenario = builtin_scenario("quadratic-small-T");
    const std::vector<SampleOrbit> orbits = scenario.sample_orbits();
    const MountainPassResult result = find_critical_point(scenario);
    REQUIRE(result.converged);
    double gn = -1.0;
    chi_gradient(result.v_star, scenario.hamiltonian, orbits, &gn);
    CHECK(gn < 10.0 * scenario.solver.gtol);
}
