#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rimpact/action.hpp"
#include "rimpact/scenario.hpp"
#include "rimpact/space.hpp"

namespace rimpact {

struct HypothesisReport {
    BEstimate b_estimate;
    bool b_bound_available = false;
    double b_bound = 0.0;
    double b_used = 0.0;  // bound when available, else mc_mean + 3 stderr
    bool exponents_available = false;
    double alpha = 0.0, q = 0.0, p = 0.0, alpha_star = 0.0;
    double h2_min_slack = 0.0;  // min (grad H(u), u) - q H(u)
    double h3_min_slack = 0.0;  // min alpha |u|^q - H(u)
    double condition_value = 0.0;  // (1 - p/2) alpha* - B/2
    bool pass_h1 = false, pass_h2 = false, pass_h3 = false, pass_condition = false;
    int samples = 0;

    bool all_pass() const { return pass_h1 && pass_h2 && pass_h3 && pass_condition; }
};

HypothesisReport verify_hypotheses(const Scenario& scenario, int samples, std::uint64_t seed);

struct GeometryRecord {
    double k_lower = 0.0;
    double k_working = 0.0;
    double rho = 0.0;  // (K^p / T)^{1/(p-1)}
    double b_used = 0.0;
    double rim_bound = 0.0;  // rho ((1-p/2) alpha* - B/2)
    double rim_min_chi = 0.0;
    int rim_samples = 0;
    std::vector<double> rim_chi;
    double chi_at_zero = 0.0;
    double e_norm_used = 0.0;
    double chi_at_v1 = 0.0;
    bool v1_negative = false;
    double paper_loop_integral = 0.0;  // measured int (J v1', v1) dt at |e| = 1
    bool ok = false;
    std::string note;
};

// Rim radius, sampled rim positivity, and the descent loop search. Throws
// std::invalid_argument when the Hamiltonian exposes no growth exponents.
GeometryRecord mountain_pass_geometry(const Scenario& scenario, const KEstimate& k,
                                      const std::vector<SampleOrbit>& orbits,
                                      double b_used, std::uint64_t seed);

// chi of the Dirichlet-windowed rotating loop at |e| = e_norm on the
// scenario's ensemble (the loop the search uses as its far endpoint).
double chi_of_loop(const Scenario& scenario, const std::vector<SampleOrbit>& orbits,
                   double e_norm);

// int_0^T (J v1', v1) dt for the plain rotating loop
// v1 = cos(2 pi t / T) e + sin(2 pi t / T) J e, measured by quadrature.
double paper_loop_symplectic_integral(const GridSpec& grid, double horizon, int dim,
                                      double e_norm);

struct OrbitTrace {
    std::vector<std::pair<int, double>> path_history;    // (iteration, max-node chi)
    std::vector<std::pair<int, double>> refine_history;  // (iteration, chi at the iterate)
    int iterations = 0;
    double gradient_norm = 0.0;
    double chi_final = 0.0;
    bool converged = false;
};

struct MountainPassResult {
    EnsembleProcess v_star;
    double chi_at_vstar = 0.0;
    double gradient_norm = 0.0;  // search-space Riesz norm, max over orbits
    int iterations = 0;
    bool converged = false;
    double chi_at_v1 = 0.0;
    double minimax_level = 0.0;  // final max-node chi of the path phase
    bool pass_level_dominates = false;  // chi_at_vstar > max(0, chi_at_v1)
    GeometryRecord geometry;
    std::vector<OrbitTrace> traces;
};

// Discrete minimax search per orbit: deform a path from the (near-)zero field
// to the loop endpoint by Armijo descent on the max-chi node, then polish the
// best node by conjugate-gradient descent on the squared gradient norm. The
// search space constrains the jumps of v to -J b_j so every search direction
// is a continuous Dirichlet field.
MountainPassResult find_critical_point(const Scenario& scenario,
                                       const GeometryRecord& geometry,
                                       const std::vector<SampleOrbit>& orbits,
                                       const EnsembleProcess* initial = nullptr);

// Convenience overload: estimates K, runs hypotheses B, geometry, then the
// search on the scenario's own ensemble.
MountainPassResult find_critical_point(const Scenario& scenario,
                                       const EnsembleProcess* initial = nullptr);

struct RecoveredU {
    EnsembleProcess u_from_v;          // J v nodewise
    EnsembleProcess u_from_conjugate;  // grad H*(t, v') segmentwise
    double pc_distance = 0.0;
};

RecoveredU recover_u(const EnsembleProcess& v, const HamiltonianSpec& spec);

// Lower-bound slack diagnostic for the coercivity estimate
// chi(v) >= (1-p/2) alpha* (T/K^p) ||v||^p_PC1 - B/2 ||v||_PC1.
struct CoercivityCheck {
    double min_margin = 0.0;  // min over samples of chi(v) - bound(v)
    double slack = 0.0;       // max(0, -min_margin)
    int samples = 0;
};

CoercivityCheck coercivity_check(const Scenario& scenario,
                                 const std::vector<SampleOrbit>& orbits, double k_working,
                                 double b_used, int samples, std::uint64_t seed);

}  // namespace rimpact
