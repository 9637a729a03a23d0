#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rimpact/grid.hpp"
#include "rimpact/hamiltonian.hpp"
#include "rimpact/impulse.hpp"

namespace rimpact {

struct SolverOptions {
    int path_nodes = 11;
    double gtol = 1e-6;
    int max_iterations = 5000;
    int path_iterations = 300;
    int redistribute_every = 10;
    double armijo_init = 1.0;
    double armijo_shrink = 0.5;
    double armijo_slope = 1e-4;
    double e_norm_cap = 65536.0;
    int k_trials = 48;
    double k_safety = 1.05;
    int rim_samples = 200;
};

struct Tolerances {
    double ode = 1e-3;
    double jump = 1e-10;
    double boundary = 1e-3;
    double pairing = 1e-5;
    double integrator = 1e-10;
};

struct EnsembleConfig {
    int n_orbits = 1000;
    std::uint64_t seed = 987654321;
};

struct Scenario {
    std::string name = "custom";
    double horizon = 1.0;
    int dim = 2;
    HamiltonianSpec hamiltonian = HamiltonianSpec::power_law(1.0, 10.0);
    ImpulseSpec impulses;
    GridSpec grid;
    EnsembleConfig ensemble;
    SolverOptions solver;
    Tolerances tolerances;

    void validate() const;
    // impulses with horizon/dimension synced from the scenario
    ImpulseSpec impulse_spec() const;
    std::vector<SampleOrbit> sample_orbits() const;
    std::vector<SampleOrbit> sample_orbits(int n_orbits, std::uint64_t seed) const;
};

std::vector<std::string> builtin_scenario_names();
Scenario builtin_scenario(const std::string& name);

std::string scenario_to_json_text(const Scenario& scenario);
Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario_file(const std::string& path);
void save_scenario_file(const Scenario& scenario, const std::string& path);

// Builtin name, or a path to a JSON config.
Scenario resolve_scenario(const std::string& name_or_path);

}  // namespace rimpact
