#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rimpact/grid.hpp"
#include "rimpact/impulse.hpp"
#include "rimpact/vec.hpp"

namespace rimpact {

// Nodal values of one orbit's path on its grid, `dim` components per node.
struct OrbitPath {
    OrbitGrid grid;
    int dim = 2;
    std::vector<double> values;

    std::span<double> node(int i) {
        return {values.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> node(int i) const {
        return {values.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
};

// Discretized stochastic process: one path per sample orbit, all sharing the
// horizon and base grid resolution.
struct EnsembleProcess {
    double horizon = 0.0;
    int dim = 2;
    bool dirichlet = false;
    std::vector<OrbitPath> orbits;

    int n_orbits() const { return static_cast<int>(orbits.size()); }
    void require_nonempty() const;
    void require_compatible(const EnsembleProcess& other) const;
};

// Zero-valued process on the ensemble's grids.
EnsembleProcess make_ensemble(const GridSpec& grid, double horizon, int dim,
                              std::span<const SampleOrbit> orbits);
EnsembleProcess make_deterministic(const GridSpec& grid, double horizon, int dim);

// Assigns x(t_node) = f(t) on every orbit; impulse pair nodes get the same
// value (continuous fill). Endpoint values are zeroed exactly when
// `dirichlet`.
void fill_from_function(EnsembleProcess& x,
                        const std::function<void(double, std::span<double>)>& f,
                        bool dirichlet);

// Elementwise linear algebra across identical grids.
EnsembleProcess scaled(const EnsembleProcess& x, double alpha);
EnsembleProcess sum(const EnsembleProcess& x, const EnsembleProcess& y);
EnsembleProcess difference(const EnsembleProcess& x, const EnsembleProcess& y);
void add_scaled(EnsembleProcess& x, double alpha, const EnsembleProcess& y);

// Left/right-aware point evaluation with linear interpolation inside
// segments.
void eval_orbit(const OrbitPath& path, double t, NodeSide side, std::span<double> out);

// ||x||_PC = max_t sqrt(E |x(t)|^2), the max taken over every node of every
// orbit (both sides of impulse pairs).
double pc_norm(const EnsembleProcess& x);

// max(||x||_PC, ||dx||_PC)
double pc1_norm(const EnsembleProcess& x);

// Segment-wise derivative process (one-sided at segment ends, never across an
// impulse pair).
EnsembleProcess derivative(const EnsembleProcess& x);

// Ensemble mean of the time quadrature of the pointwise pairing.
double inner_product(const EnsembleProcess& x, const EnsembleProcess& y);

// min over nodes of E|x|^2 E|y|^2 - (E|x||y|)^2.
double expectation_cs_min_slack(const EnsembleProcess& x, const EnsembleProcess& y);

class Rng;

// Random Dirichlet direction: per-component combination of the first `modes`
// sine modes with normal coefficients, identical on every orbit.
void fill_random_sines(EnsembleProcess& x, int modes, Rng& rng);

// max |x| over all nodes of all orbits; equals the PC norm for fields that
// carry the same deterministic function on every orbit.
double nodal_sup_norm(const EnsembleProcess& x);
double nodal_sup_pc1(const EnsembleProcess& x);

// CSV bundle of a process: header orbit_id,t,side,x1..xd, one row per node.
std::string ensemble_to_csv(const EnsembleProcess& x,
                            const std::string& component_prefix = "x");

// Reads values written by ensemble_to_csv back onto an ensemble with the same
// grids; node times must match exactly.
void ensemble_values_from_csv(EnsembleProcess& x, const std::string& text);

enum class TrialFamily { sine_modes, pinned_cubics, mixed };

struct KEstimate {
    double k_lower = 0.0;    // max over trials of ||x||_PC1 / ||dx||_PC
    double k_working = 0.0;  // k_lower * safety
    int best_trial = -1;
    int trials = 0;
    std::string family;
};

// Empirical lower bound for the embedding constant K with
// ||x||_PC1 <= K ||dx||_PC over Dirichlet trials.
KEstimate estimate_K(const GridSpec& grid, TrialFamily family, int samples,
                     std::uint64_t seed, double horizon, int dim, double safety = 1.05);

}  // namespace rimpact
