#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rimpact/rng.hpp"
#include "rimpact/space.hpp"

using namespace rimpact;

namespace {

constexpr double kPi = 3.14159265358979323846;

GridSpec grid_of(int nodes) {
    GridSpec g;
    g.base_nodes = nodes;
    return g;
}

EnsembleProcess sine_process(double horizon, int nodes, double freq_factor) {
    EnsembleProcess x = make_deterministic(grid_of(nodes), horizon, 2);
    fill_from_function(
        x,
        [&](double t, std::span<double> out) {
            out[0] = std::sin(freq_factor * kPi * t / horizon);
            out[1] = 0.0;
        },
        true);
    return x;
}

}  // namespace

TEST_CASE("pc norm of constants and two-orbit ensembles") {
    SampleOrbit empty;
    empty.horizon = 1.0;
    std::vector<SampleOrbit> orbits = {empty, empty};
    EnsembleProcess x = make_ensemble(grid_of(17), 1.0, 2, orbits);
    // orbit 0 constant (1,0), orbit 1 constant 0
    for (double& v : x.orbits[0].values) v = 0.0;
    for (int i = 0; i < x.orbits[0].grid.node_count(); ++i) x.orbits[0].node(i)[0] = 1.0;
    CHECK(pc_norm(x) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));

    EnsembleProcess single = make_deterministic(grid_of(17), 1.0, 2);
    fill_from_function(
        single, [](double, std::span<double> out) { out[0] = -2.0; out[1] = 1.0; }, false);
    CHECK(pc_norm(single) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
}

TEST_CASE("pc norm of a sine reaches 1 at the midpoint") {
    const EnsembleProcess x = sine_process(2.0, 65, 1.0);
    CHECK(pc_norm(x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pc1 norm picks up the derivative factor 2 pi") {
    const EnsembleProcess x = sine_process(1.0, 257, 2.0);
    CHECK(pc1_norm(x) == doctest::Approx(2.0 * kPi).epsilon(1e-3));
    const EnsembleProcess zero = make_deterministic(grid_of(17), 1.0, 2);
    CHECK(pc1_norm(zero) == 0.0);
}

TEST_CASE("norms are absolutely homogeneous and satisfy the triangle inequality") {
    Rng rng(21, 0);
    for (int trial = 0; trial < 10; ++trial) {
        EnsembleProcess x = make_deterministic(grid_of(33), 1.0, 2);
        EnsembleProcess y = x;
        fill_random_sines(x, 4, rng);
        fill_random_sines(y, 4, rng);
        const double lambda = rng.uniform(-3.0, 3.0);
        CHECK(pc_norm(scaled(x, lambda)) ==
              doctest::Approx(std::abs(lambda) * pc_norm(x)).epsilon(1e-12));
        CHECK(pc1_norm(scaled(x, lambda)) ==
              doctest::Approx(std::abs(lambda) * pc1_norm(x)).epsilon(1e-12));
        CHECK(pc_norm(sum(x, y)) <= pc_norm(x) + pc_norm(y) + 1e-12);
        CHECK(pc1_norm(sum(x, y)) <= pc1_norm(x) + pc1_norm(y) + 1e-12);
    }
}

TEST_CASE("derivative of a per-segment linear ramp is constant") {
    SampleOrbit orbit;
    orbit.horizon = 1.0;
    orbit.times = {0.4};
    orbit.draws = {0.4};
    orbit.jumps = {Vec{0.25, 0.0}};
    std::vector<SampleOrbit> orbits = {orbit};
    EnsembleProcess x = make_ensemble(grid_of(17), 1.0, 2, orbits);
    OrbitPath& path = x.orbits[0];
    for (int i = 0; i < path.grid.node_count(); ++i) {
        path.node(i)[0] = 3.0 * path.grid.times[static_cast<std::size_t>(i)];
        if (path.grid.sides[static_cast<std::size_t>(i)] == NodeSide::right) {
            // shift the second branch so the path jumps at xi
            for (int k = i; k < path.grid.node_count(); ++k)
                path.node(k)[0] = 3.0 * path.grid.times[static_cast<std::size_t>(k)] + 0.25;
            break;
        }
    }
    const EnsembleProcess d = derivative(x);
    for (int i = 0; i < d.orbits[0].grid.node_count(); ++i)
        CHECK(d.orbits[0].node(i)[0] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("derivative of sin(2 pi t) matches the analytic derivative to 1e-3 sup") {
    const EnsembleProcess x = sine_process(1.0, 257, 2.0);
    const EnsembleProcess d = derivative(x);
    double worst = 0.0;
    const OrbitPath& path = d.orbits[0];
    for (int i = 0; i < path.grid.node_count(); ++i) {
        const double t = path.grid.times[static_cast<std::size_t>(i)];
        worst = std::max(worst,
                         std::abs(path.node(i)[0] - 2.0 * kPi * std::cos(2.0 * kPi * t)));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("derivative needs at least 3 nodes per segment") {
    EnsembleProcess x = make_deterministic(grid_of(9), 1.0, 1);
    x.orbits[0].grid.segments[0].end = 2;  // hand-built degenerate segment
    x.orbits[0].grid.times.resize(2);
    x.orbits[0].grid.sides.resize(2);
    x.orbits[0].grid.weights.resize(2);
    x.orbits[0].values.resize(2);
    CHECK_THROWS_AS(derivative(x), std::invalid_argument);
}

TEST_CASE("inner product is positive definite, bilinear, and orthogonalizes sine modes") {
    EnsembleProcess x = sine_process(1.0, 129, 1.0);
    EnsembleProcess y = sine_process(1.0, 129, 2.0);
    CHECK(inner_product(x, x) > 0.0);
    CHECK(std::abs(inner_product(x, y)) < 1e-6);
    const EnsembleProcess zero = make_deterministic(grid_of(129), 1.0, 2);
    CHECK(inner_product(zero, zero) == 0.0);
    const double a = 1.7, b = -0.4;
    EnsembleProcess combo = sum(scaled(x, a), scaled(y, b));
    CHECK(inner_product(combo, x) ==
          doctest::Approx(a * inner_product(x, x) + b * inner_product(y, x)).epsilon(1e-12));
}

TEST_CASE("quadrature weights sum to the horizon") {
    SampleOrbit orbit;
    orbit.horizon = 1.0;
    orbit.times = {0.21, 0.55, 0.9};
    orbit.draws = {0.21, 0.34, 0.35};
    orbit.jumps = {Vec{0.1, 0.0}, Vec{0.1, 0.0}, Vec{0.1, 0.0}};
    std::vector<SampleOrbit> orbits = {orbit};
    const EnsembleProcess x = make_ensemble(grid_of(33), 1.0, 2, orbits);
    double total = 0.0;
    for (double w : x.orbits[0].grid.weights) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("expectation Cauchy-Schwarz slack") {
    Rng rng(33, 0);
    SampleOrbit empty;
    empty.horizon = 1.0;

    SUBCASE("y = x gives equality") {
        std::vector<SampleOrbit> orbits(4, empty);
        EnsembleProcess x = make_ensemble(grid_of(17), 1.0, 2, orbits);
        for (OrbitPath& path : x.orbits)
            for (double& v : path.values) v = rng.normal();
        CHECK(std::abs(expectation_cs_min_slack(x, x)) <= 1e-12);
    }
    SUBCASE("single orbit is degenerate equality") {
        std::vector<SampleOrbit> orbits(1, empty);
        EnsembleProcess x = make_ensemble(grid_of(17), 1.0, 2, orbits);
        EnsembleProcess y = x;
        for (double& v : x.orbits[0].values) v = rng.normal();
        for (double& v : y.orbits[0].values) v = rng.normal();
        CHECK(std::abs(expectation_cs_min_slack(x, y)) <= 1e-14);
    }
    SUBCASE("independent random ensembles have positive slack") {
        std::vector<SampleOrbit> orbits(16, empty);
        EnsembleProcess x = make_ensemble(grid_of(17), 1.0, 2, orbits);
        EnsembleProcess y = x;
        for (OrbitPath& path : x.orbits)
            for (double& v : path.values) v = 1.0 + 0.2 * rng.normal();
        for (OrbitPath& path : y.orbits)
            for (double& v : path.values) v = 1.0 + 0.2 * rng.normal();
        CHECK(expectation_cs_min_slack(x, y) > 0.0);
    }
}

TEST_CASE("grid refinement converges the pc norm at second order") {
    // max at an off-grid location
    auto build = [](int nodes) {
        EnsembleProcess x = make_deterministic(grid_of(nodes), 1.0, 2);
        fill_from_function(
            x,
            [](double t, std::span<double> out) {
                out[0] = std::sin(kPi * t) * (1.0 + 0.3 * t);
                out[1] = 0.0;
            },
            true);
        return pc_norm(x);
    };
    const double reference = build(8193);
    // second-order envelope: the node-sampling error of the max is bounded by
    // max|f''|/2 (h/2)^2 with max|f''| about 11.4 here
    for (int nodes : {17, 33, 65, 129, 257}) {
        const double h = 1.0 / (nodes - 1);
        const double err = std::abs(build(nodes) - reference);
        CHECK(err <= 3.0 * h * h);
    }
}

TEST_CASE("estimate_K finds ratio 1 on the unit horizon") {
    const KEstimate est = estimate_K(grid_of(65), TrialFamily::mixed, 32, 7, 1.0, 2);
    CHECK(est.k_lower == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(est.k_working == doctest::Approx(1.05).epsilon(1e-9));
}

TEST_CASE("estimate_K is monotone in the number of trials and scale invariant") {
    const KEstimate few = estimate_K(grid_of(65), TrialFamily::mixed, 8, 7, 2.5, 2);
    const KEstimate many = estimate_K(grid_of(65), TrialFamily::mixed, 32, 7, 2.5, 2);
    CHECK(many.k_lower >= few.k_lower);
    CHECK(many.k_lower >= 1.0);
}

TEST_CASE("ensembles validate compatibility") {
    const EnsembleProcess a = make_deterministic(grid_of(17), 1.0, 2);
    const EnsembleProcess b = make_deterministic(grid_of(33), 1.0, 2);
    CHECK_THROWS_AS(inner_product(a, b), std::invalid_argument);
    EnsembleProcess empty;
    CHECK_THROWS_AS(pc_norm(empty), std::invalid_argument);
}

TEST_CASE("ensemble CSV bundles round-trip node values exactly") {
    SampleOrbit orbit;
    orbit.horizon = 1.0;
    orbit.times = {0.37};
    orbit.draws = {0.37};
    orbit.jumps = {Vec{0.5, -0.25}};
    std::vector<SampleOrbit> orbits = {orbit, orbit};
    EnsembleProcess x = make_ensemble(grid_of(17), 1.0, 2, orbits);
    Rng rng(41, 0);
    for (OrbitPath& path : x.orbits)
        for (double& v : path.values) v = rng.normal();
    const std::string text = ensemble_to_csv(x);
    EnsembleProcess y = make_ensemble(grid_of(17), 1.0, 2, orbits);
    ensemble_values_from_csv(y, text);
    for (std::size_t o = 0; o < x.orbits.size(); ++o)
        CHECK(x.orbits[o].values == y.orbits[o].values);
    CHECK(ensemble_to_csv(y) == text);
    EnsembleProcess wrong = make_ensemble(grid_of(33), 1.0, 2, orbits);
    CHECK_THROWS_AS(ensemble_values_from_csv(wrong, text), std::invalid_argument);
}

TEST_CASE("simpson weights integrate cubics exactly on even-interval segments") {
    GridSpec g;
    g.base_nodes = 33;
    g.quadrature = QuadratureRule::simpson;
    EnsembleProcess x = make_deterministic(g, 1.0, 1);
    const OrbitGrid& grid = x.orbits[0].grid;
    std::vector<double> nodal(static_cast<std::size_t>(grid.node_count()));
    for (int i = 0; i < grid.node_count(); ++i) {
        const double t = grid.times[static_cast<std::size_t>(i)];
        nodal[static_cast<std::size_t>(i)] = t * t * t - 2.0 * t;
    }
    CHECK(quadrature(grid, nodal) == doctest::Approx(0.25 - 1.0).epsilon(1e-14));
}
