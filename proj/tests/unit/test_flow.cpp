#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rimpact/flow.hpp"

using namespace rimpact;

namespace {

constexpr double kPi = 3.14159265358979323846;

ImpulseSpec example41_spec() {
    ImpulseSpec spec;
    spec.horizon = 1.0;
    spec.dimension = 2;
    spec.intervals.first = 0.5;
    spec.intervals.ratio = 0.5;
    spec.jumps.amplitude = 1.0;
    spec.jumps.geo = 0.25;
    spec.jumps.poly = 1;
    return spec;
}

}  // namespace

TEST_CASE("harmonic rotation returns to the start after 2 pi") {
    const HamiltonianSpec spec = HamiltonianSpec::builtin("quadratic");
    const Vec u0 = {1.0, 0.0};
    const SegmentResult result = integrate_segment(spec, u0, 0.0, 2.0 * kPi, 1e-12);
    CHECK(result.at_nodes.back()[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(result.at_nodes.back()[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("zero hamiltonian leaves the state constant") {
    const HamiltonianSpec spec = HamiltonianSpec::builtin("zero");
    const Vec u0 = {0.3, -0.7};
    const SegmentResult result = integrate_segment(spec, u0, 0.0, 5.0, 1e-10);
    CHECK(result.at_nodes.back() == u0);
    CHECK(result.energy_drift == 0.0);
}

TEST_CASE("power-law flow completes one period in pi/5 r^-8") {
    const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 10.0);
    for (double r : {0.8, 1.0, 1.2}) {
        const double period = kPi / 5.0 * std::pow(r, -8.0);
        Vec u0 = {r, 0.0};
        const SegmentResult result = integrate_segment(spec, u0, 0.0, period, 1e-12);
        CHECK(norm2(result.at_nodes.back()) == doctest::Approx(r).epsilon(1e-9));
        const double err =
            std::hypot(result.at_nodes.back()[0] - r, result.at_nodes.back()[1]);
        CHECK(err <= 1e-4 * r);
    }
}

TEST_CASE("measured first-return time matches the period law to 1e-4 relative") {
    const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 10.0);
    for (double r : {0.8, 1.0, 1.2}) {
        const double measured = first_return_time(spec, r);
        const double analytic = kPi / 5.0 * std::pow(r, -8.0);
        CHECK(std::abs(measured - analytic) <= 1e-4 * analytic);
    }
}

TEST_CASE("energy drift shrinks with the tolerance") {
    const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 10.0);
    const Vec u0 = {1.0, 0.4};
    double previous = 1e300;
    for (double tol : {1e-6, 1e-8, 1e-10}) {
        const SegmentResult result = integrate_segment(spec, u0, 0.0, 1.0, tol);
        CHECK(result.energy_drift < 10.0 * previous);
        previous = result.energy_drift;
    }
    CHECK(previous < 1e-8);
}

TEST_CASE("forward-then-backward integration returns the start") {
    const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 4.0);
    const Vec u0 = {0.9, -0.2};
    const double tol = 1e-10;
    const SegmentResult fwd = integrate_segment(spec, u0, 0.0, 0.7, tol);
    // reverse flow: negated right-hand side integrated over the same window
    const Rhs rhs = hamiltonian_rhs(spec);
    const Rhs reverse = [&rhs](double t, std::span<const double> u, std::span<double> dudt) {
        rhs(t, u, dudt);
        for (double& x : dudt) x = -x;
    };
    const double times[2] = {0.0, 0.7};
    const std::vector<Vec> back = rk45_at_nodes(reverse, times, fwd.at_nodes.back(), tol);
    for (int c = 0; c < 2; ++c)
        CHECK(std::abs(back.back()[static_cast<std::size_t>(c)] -
                       u0[static_cast<std::size_t>(c)]) < 10.0 * tol);
}

TEST_CASE("radial hamiltonians conserve the norm along segments") {
    const HamiltonianSpec spec = HamiltonianSpec::power_law(1.0, 10.0);
    const Vec u0 = {0.95, 0.31};
    const double r = norm2(u0);
    std::vector<double> nodes;
    for (int i = 0; i <= 16; ++i) nodes.push_back(i / 16.0);
    const SegmentResult result = integrate_segment(spec, u0, 0.0, 1.0, 1e-11, nodes);
    for (const Vec& u : result.at_nodes) CHECK(norm2(u) == doctest::Approx(r).epsilon(1e-9));
}

TEST_CASE("propagation from zero stays at zero until the first impulse") {
    const HamiltonianSpec hspec = HamiltonianSpec::power_law(1.0, 10.0);
    const SampleOrbit orbit = sample_orbit(example41_spec(), 3);
    REQUIRE(orbit.size() >= 2);
    GridSpec grid;
    grid.base_nodes = 65;
    const Vec u0 = {0.0, 0.0};
    const PiecewisePath path = propagate_orbit(hspec, u0, orbit, grid, 1e-10);

    const Segment& first = path.path.grid.segments[0];
    for (int i = first.begin; i < first.end; ++i) CHECK(norm2(path.path.node(i)) == 0.0);

    // after the first jump the radius equals |Delta_1| and stays there
    const double radius = norm2(orbit.jumps[0]);
    const Segment& second = path.path.grid.segments[1];
    for (int i = second.begin; i < second.end; ++i)
        CHECK(norm2(path.path.node(i)) == doctest::Approx(radius).epsilon(1e-8));
}

TEST_CASE("jump invariant is exact at every impulse pair") {
    const HamiltonianSpec hspec = HamiltonianSpec::power_law(1.0, 10.0);
    const SampleOrbit orbit = sample_orbit(example41_spec(), 8);
    GridSpec grid;
    grid.base_nodes = 65;
    const Vec u0 = {0.2, 0.1};
    const PiecewisePath path = propagate_orbit(hspec, u0, orbit, grid, 1e-10);
    REQUIRE(path.path.grid.impulse_left.size() == orbit.jumps.size());
    for (std::size_t j = 0; j < orbit.jumps.size(); ++j) {
        const int left = path.path.grid.impulse_left[j];
        for (int c = 0; c < 2; ++c) {
            const double expected = path.path.node(left)[static_cast<std::size_t>(c)] +
                                    orbit.jumps[j][static_cast<std::size_t>(c)];
            CHECK(path.path.node(left + 1)[static_cast<std::size_t>(c)] == expected);
        }
    }
}

TEST_CASE("empty orbit propagates as one smooth segment") {
    const HamiltonianSpec hspec = HamiltonianSpec::builtin("quadratic");
    SampleOrbit orbit;
    orbit.horizon = 1.0;
    GridSpec grid;
    grid.base_nodes = 33;
    const Vec u0 = {1.0, 0.0};
    const PiecewisePath path = propagate_orbit(hspec, u0, orbit, grid, 1e-10);
    CHECK(path.path.grid.segments.size() == 1);
    CHECK(path.segment_drift.size() == 1);
    CHECK(path.segment_drift[0] < 1e-9);
}

TEST_CASE("energy drift diagnostic is zero for the zero hamiltonian") {
    const HamiltonianSpec hspec = HamiltonianSpec::builtin("zero");
    const SampleOrbit orbit = sample_orbit(example41_spec(), 4);
    GridSpec grid;
    grid.base_nodes = 33;
    const Vec u0 = {0.5, 0.5};
    const PiecewisePath path = propagate_orbit(hspec, u0, orbit, grid, 1e-10);
    for (double d : energy_drift(path, hspec)) CHECK(d == 0.0);
}

TEST_CASE("stiff right-hand sides raise an integration error with the last good time") {
    HamiltonianSpec blowup;
    blowup.kind = HamiltonianSpec::Kind::callable;
    blowup.name = "blowup";
    blowup.value_fn = [](double, std::span<const double> u) { return dot(u, u); };
    blowup.grad_fn = [](double t, std::span<const double> u, std::span<double> out) {
        const double factor = 1.0 / (0.5 - t);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = factor * factor * (u[i] + 1.0);
    };
    const Vec u0 = {1.0, 1.0};
    try {
        integrate_segment(blowup, u0, 0.0, 0.5, 1e-10);
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.t_last > 0.0);
        CHECK(e.t_last <= 0.5);
    }
}

TEST_CASE("implicit midpoint conserves quadratic energy over long horizons") {
    const HamiltonianSpec spec = HamiltonianSpec::builtin("quadratic");
    std::vector<double> times;
    for (int i = 0; i <= 400; ++i) times.push_back(i * 0.25);
    const Vec u0 = {1.0, 0.0};
    const std::vector<Vec> path = implicit_midpoint_at_nodes(hamiltonian_rhs(spec), times, u0, 4);
    for (const Vec& u : path)
        CHECK(0.5 * dot(u, u) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("integrate_segment validates its window") {
    const HamiltonianSpec spec = HamiltonianSpec::builtin("quadratic");
    const Vec u0 = {1.0, 0.0};
    CHECK_THROWS_AS(integrate_segment(spec, u0, 1.0, 0.5, 1e-10), std::invalid_argument);
    CHECK_THROWS_AS(integrate_segment(spec, u0, 0.0, 1.0, -1.0), std::invalid_argument);
}
