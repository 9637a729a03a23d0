#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "rimpact/vec.hpp"

namespace rimpact {

// Standard symplectic structure on R^{2n}: J(u) = (u_{n+1..2n}, -u_{1..n}).
struct SymplecticForm {
    int half_dimension = 1;

    int dimension() const { return 2 * half_dimension; }
    void apply(std::span<const double> u, std::span<double> out) const;
    Vec apply(std::span<const double> u) const;
};

// out = J u; half dimension inferred from the size. Throws on odd size.
void apply_j(std::span<const double> u, std::span<double> out);
Vec apply_j_copy(std::span<const double> u);

// H(t, u) with gradient. Power-law kind is H(u) = alpha |u|^q (q > 2) and
// carries the closed-form conjugate exponents; callable kind wraps arbitrary
// value/gradient functions and reaches the conjugate through a numeric inner
// maximization.
struct HamiltonianSpec {
    enum class Kind { power_law, callable };

    Kind kind = Kind::power_law;
    double alpha = 1.0;
    double q = 10.0;
    std::string name;  // builtin callable name, empty for power law
    std::function<double(double, std::span<const double>)> value_fn;
    std::function<void(double, std::span<const double>, std::span<double>)> grad_fn;
    // optional growth certificate for callable kind: H <= cert_alpha |u|^cert_q
    bool has_certificate = false;
    double cert_alpha = 0.0;
    double cert_q = 0.0;

    static HamiltonianSpec power_law(double alpha, double q);
    static HamiltonianSpec builtin(const std::string& name);  // "quadratic" | "zero"

    void validate() const;
    bool closed_form() const { return kind == Kind::power_law; }
    // conjugate exponent p = q/(q-1), in (1,2) for q > 2
    double p() const { return q / (q - 1.0); }
    // alpha* = (alpha q)^{-p/q} / p
    double alpha_star() const;
    // (alpha, q) used for growth checks: own exponents or the certificate
    bool growth_exponents(double& alpha_out, double& q_out) const;
};

double h_value(const HamiltonianSpec& spec, double t, std::span<const double> u);
void h_grad(const HamiltonianSpec& spec, double t, std::span<const double> u,
            std::span<double> out);
Vec h_grad_copy(const HamiltonianSpec& spec, double t, std::span<const double> u);

// Legendre transform H*(t, v) = sup_u [(v,u) - H(t,u)] and its gradient (the
// maximizing u). Closed form for power laws; numeric ascent otherwise.
double legendre_value(const HamiltonianSpec& spec, double t, std::span<const double> v);
void legendre_grad(const HamiltonianSpec& spec, double t, std::span<const double> v,
                   std::span<double> out);
Vec legendre_grad_copy(const HamiltonianSpec& spec, double t, std::span<const double> v);

// Minimum slack, over a random sample, of each inequality tying H to H*.
// Nonnegative slack means the inequality held.
struct DualityReport {
    double slack_euler = 0.0;        // (grad H(u), u) - q H(u)
    double slack_growth = 0.0;       // alpha |u|^q - H(u)
    double slack_conj_euler = 0.0;   // p H*(v) - (grad H*(v), v)
    double slack_conj_upper = 0.0;   // M* |v|^p - H*(v), over |v| >= 1
    double slack_conj_lower = 0.0;   // H*(v) - alpha* |v|^p
    double m_star = 0.0;
    int samples = 0;

    double min_slack() const;
};

DualityReport check_duality_inequalities(const HamiltonianSpec& spec, int samples,
                                         std::uint64_t seed);

}  // namespace rimpact
