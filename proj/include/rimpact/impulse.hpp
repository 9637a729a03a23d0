#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rimpact/vec.hpp"

namespace rimpact {

// Thrown when a closed-form quantity is requested for a spec family that has
// none; callers fall back to the Monte Carlo estimate.
struct UnsupportedSpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TauKind { uniform, point_mass };

struct TauLaw {
    TauKind kind = TauKind::uniform;
    double fraction = 0.5;  // point_mass: tau_j = fraction * d_j, fraction in (0,1)
};

// Inter-arrival bounds d_j > 0, 1-based index.
struct IntervalBounds {
    enum class Kind { none, geometric, explicit_list };
    Kind kind = Kind::geometric;
    double first = 0.5;  // d_1
    double ratio = 0.5;  // d_{j+1} = ratio * d_j
    std::vector<double> values;

    bool finite() const { return kind != Kind::geometric; }
    int count_limit() const;
    double at(int j) const;
};

// Jump scale c_j, 1-based; realized jump is b_j(tau) = c_j * tau * e_dir.
// poly_geometric: c_j = amplitude * j^poly * geo^j with poly in {0, 1}.
// explicit_list: c_j = values[j-1], zero past the end of the list.
struct JumpCoeffs {
    enum class Kind { poly_geometric, explicit_list };
    Kind kind = Kind::poly_geometric;
    double amplitude = 1.0;
    double geo = 0.25;
    int poly = 1;
    std::vector<double> values;

    double at(int j) const;
};

struct ImpulseSpec {
    double horizon = 1.0;
    int dimension = 2;  // 2n, even, >= 2
    IntervalBounds intervals;
    TauLaw tau;
    JumpCoeffs jumps;
    Vec direction;  // direction in R^dimension; normalized on use; default e_1
    int max_impulses = 64;
    double min_separation_rel = 1e-12;  // stop once tau_j < rel * horizon

    void validate() const;  // throws std::invalid_argument
    Vec unit_direction() const;
    double mean_tau(int j) const;  // E[tau_j]
};

enum class OrbitTruncation { horizon, interval_cap, resolution, exhausted };

// One realization of the impulse process on [0, horizon].
struct SampleOrbit {
    double horizon = 0.0;
    std::vector<double> times;  // xi_j, strictly increasing, in (0, horizon)
    std::vector<double> draws;  // tau_j with xi_j = xi_{j-1} + tau_j
    std::vector<Vec> jumps;     // Delta_j = b_j(tau_j)
    std::uint64_t seed = 0;
    std::uint64_t orbit_index = 0;
    OrbitTruncation truncation = OrbitTruncation::horizon;
    double tail_mass_bound = 0.0;  // bound on E sum_{j>k} |b_j(tau_j)|

    int size() const { return static_cast<int>(times.size()); }
};

// Deterministic in (spec, seed, orbit_index); orbit substreams are
// independent, so ensembles may be generated in any order.
SampleOrbit sample_orbit(const ImpulseSpec& spec, std::uint64_t seed,
                         std::uint64_t orbit_index = 0);

std::vector<SampleOrbit> sample_ensemble(const ImpulseSpec& spec, int n_orbits,
                                         std::uint64_t seed);

// N(t) = #{ j : xi_j <= t }. Right-continuous, nondecreasing.
// Throws std::domain_error for t outside [0, horizon].
int counting_process(const SampleOrbit& orbit, double t);

struct BEstimate {
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    int n_orbits = 0;
};

// Monte Carlo estimate of B = E[sum_j |b_j(tau_j)|].
BEstimate estimate_B(const ImpulseSpec& spec, int n_orbits, std::uint64_t seed);

bool analytic_B_bound_available(const ImpulseSpec& spec);

// Closed-form upper bound for B; bounds each draw by tau <= 1, which is the
// loose route that yields 4/9 for the j/4^j family. Throws
// UnsupportedSpecError when the jump family has no closed form.
double analytic_B_bound(const ImpulseSpec& spec);

// Partial sum of the bounding series, sum_{j<=k} |c_j|.
double b_bound_partial(const ImpulseSpec& spec, int k);

}  // namespace rimpact
