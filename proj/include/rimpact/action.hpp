#pragma once

#include <span>
#include <vector>

#include "rimpact/hamiltonian.hpp"
#include "rimpact/impulse.hpp"
#include "rimpact/space.hpp"

namespace rimpact {

struct ChiReport {
    double chi_value = 0.0;
    double term_symplectic = 0.0;  // 1/2 int E (J v', v) dt
    double term_conjugate = 0.0;   // int E H*(t, v') dt
    double term_impulse = 0.0;     // 1/2 E sum_j (v(xi_j-), Delta_j)
    double gradient_norm = 0.0;    // discrete Riesz norm of the derivative
};

// Energy functional: ensemble mean of
// -1/2 int (J u', u) dt - int H(t, u) dt - 1/2 sum_j (J u(xi_j-), Delta_j).
double phi(const EnsembleProcess& u, const HamiltonianSpec& spec,
           std::span<const SampleOrbit> orbits);

// Dual action functional with per-term breakdown. `with_gradient` adds the
// discrete Riesz gradient norm (one extra assembly pass).
ChiReport chi(const EnsembleProcess& v, const HamiltonianSpec& spec,
              std::span<const SampleOrbit> orbits, bool with_gradient = false);

double chi_value(const EnsembleProcess& v, const HamiltonianSpec& spec,
                 std::span<const SampleOrbit> orbits);

// Derivative pairing (chi'(v), h); h must satisfy h(0) = h(T) = 0.
double chi_pairing(const EnsembleProcess& v, const EnsembleProcess& h,
                   const HamiltonianSpec& spec, std::span<const SampleOrbit> orbits);

// Riesz representative of chi'(v) in the discrete inner product: g with
// inner_product(g, h) = chi_pairing(v, h) for all Dirichlet grid h. The
// quadrature-weighted normal equations are diagonal, so g = r / w nodewise.
EnsembleProcess chi_gradient(const EnsembleProcess& v, const HamiltonianSpec& spec,
                             std::span<const SampleOrbit> orbits,
                             double* gradient_norm = nullptr);

namespace detail {

// Nodal covector of the per-orbit dual action: pairing = sum_m r_m . h_m.
void chi_covector_orbit(const OrbitPath& v, const HamiltonianSpec& spec,
                        const SampleOrbit& orbit, std::vector<double>& r);

void check_process_orbits(const EnsembleProcess& v, std::span<const SampleOrbit> orbits);

}  // namespace detail

}  // namespace rimpact
