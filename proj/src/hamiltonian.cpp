#include "rimpact/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rimpact/rng.hpp"

namespace rimpact {

namespace {

void check_state(std::span<const double> u, const char* what) {
    if (!all_finite(u)) throw std::domain_error(std::string(what) + ": non-finite state");
}

// sup_u [(v,u) - H(t,u)] by safeguarded gradient ascent on the concave inner
// problem; ascent direction is the residual v - grad H(u).
struct InnerMax {
    Vec u;
    double value = 0.0;
};

InnerMax conjugate_inner_max(const HamiltonianSpec& spec, double t, std::span<const double> v) {
    const std::size_t dim = v.size();
    Vec u(dim, 0.0);
    Vec g(dim, 0.0);
    Vec trial(dim, 0.0);
    const double vnorm = norm2(v);
    const double tol = 1e-10 * (1.0 + vnorm);
    auto objective = [&](std::span<const double> uu) {
        return dot(v, uu) - h_value(spec, t, uu);
    };
    double f = objective(u);
    double step = 1.0;
    for (int it = 0; it < 800; ++it) {
        h_grad(spec, t, u, g);
        for (std::size_t i = 0; i < dim; ++i) g[i] = v[i] - g[i];
        const double res = norm2(g);
        if (res < tol) return {std::move(u), f};
        bool moved = false;
        for (int halve = 0; halve < 60; ++halve) {
            trial = u;
            axpy(step, g, trial);
            const double ft = objective(trial);
            if (ft > f) {
                u = trial;
                f = ft;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            if (res < 1e-6 * (1.0 + vnorm)) return {std::move(u), f};
            throw std::runtime_error(
                "legendre transform: inner maximization stalled, residual " + std::to_string(res));
        }
    }
    throw std::runtime_error("legendre transform: inner maximization did not converge");
}

}  // namespace

void SymplecticForm::apply(std::span<const double> u, std::span<double> out) const {
    const int n = half_dimension;
    if (static_cast<int>(u.size()) != 2 * n || out.size() != u.size())
        throw std::invalid_argument("symplectic form: dimension mismatch");
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(n + i)];
        out[static_cast<std::size_t>(n + i)] = -u[static_cast<std::size_t>(i)];
    }
}

Vec SymplecticForm::apply(std::span<const double> u) const {
    Vec out(u.size(), 0.0);
    apply(u, out);
    return out;
}

void apply_j(std::span<const double> u, std::span<double> out) {
    if (u.size() % 2 != 0) throw std::invalid_argument("apply_j: odd dimension");
    SymplecticForm form{static_cast<int>(u.size() / 2)};
    form.apply(u, out);
}

Vec apply_j_copy(std::span<const double> u) {
    Vec out(u.size(), 0.0);
    apply_j(u, out);
    return out;
}

HamiltonianSpec HamiltonianSpec::power_law(double alpha, double q) {
    HamiltonianSpec spec;
    spec.kind = Kind::power_law;
    spec.alpha = alpha;
    spec.q = q;
    spec.validate();
    return spec;
}

HamiltonianSpec HamiltonianSpec::builtin(const std::string& name) {
    HamiltonianSpec spec;
    spec.kind = Kind::callable;
    spec.name = name;
    if (name == "quadratic") {
        spec.value_fn = [](double, std::span<const double> u) { return 0.5 * dot(u, u); };
        spec.grad_fn = [](double, std::span<const double> u, std::span<double> out) {
            std::copy(u.begin(), u.end(), out.begin());
        };
    } else if (name == "zero") {
        spec.value_fn = [](double, std::span<const double>) { return 0.0; };
        spec.grad_fn = [](double, std::span<const double>, std::span<double> out) {
            std::fill(out.begin(), out.end(), 0.0);
        };
    } else {
        throw std::invalid_argument("unknown builtin hamiltonian: " + name);
    }
    return spec;
}

void HamiltonianSpec::validate() const {
    if (kind == Kind::power_law) {
        if (!(alpha > 0.0)) throw std::invalid_argument("power-law hamiltonian needs alpha > 0");
        if (!(q > 2.0)) throw std::invalid_argument("power-law hamiltonian needs q > 2");
        const double pp = p();
        if (!(pp > 1.0 && pp < 2.0))
            throw std::invalid_argument("power-law hamiltonian: conjugate exponent out of (1,2)");
    } else {
        if (!value_fn || !grad_fn)
            throw std::invalid_argument("callable hamiltonian needs value and gradient");
        if (has_certificate && !(cert_q > 2.0))
            throw std::invalid_argument("growth certificate needs q > 2");
    }
}

double HamiltonianSpec::alpha_star() const {
    double a, qq;
    if (!growth_exponents(a, qq))
        throw std::invalid_argument("alpha_star needs a power law or a growth certificate");
    const double pp = qq / (qq - 1.0);
    return std::pow(a * qq, -pp / qq) / pp;
}

bool HamiltonianSpec::growth_exponents(double& alpha_out, double& q_out) const {
    if (kind == Kind::power_law) {
        alpha_out = alpha;
        q_out = q;
        return true;
    }
    if (has_certificate) {
        alpha_out = cert_alpha;
        q_out = cert_q;
        return true;
    }
    return false;
}

double h_value(const HamiltonianSpec& spec, double t, std::span<const double> u) {
    check_state(u, "h_value");
    if (spec.kind == HamiltonianSpec::Kind::power_law) {
        return spec.alpha * std::pow(dot(u, u), 0.5 * spec.q);
    }
    return spec.value_fn(t, u);
}

void h_grad(const HamiltonianSpec& spec, double t, std::span<const double> u,
            std::span<double> out) {
    check_state(u, "h_grad");
    if (spec.kind == HamiltonianSpec::Kind::power_law) {
        const double r = norm2(u);
        if (r == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        const double factor = spec.alpha * spec.q * std::pow(r, spec.q - 2.0);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = factor * u[i];
        return;
    }
    spec.grad_fn(t, u, out);
}

Vec h_grad_copy(const HamiltonianSpec& spec, double t, std::span<const double> u) {
    Vec out(u.size(), 0.0);
    h_grad(spec, t, u, out);
    return out;
}

double legendre_value(const HamiltonianSpec& spec, double t, std::span<const double> v) {
    check_state(v, "legendre_value");
    if (spec.kind == HamiltonianSpec::Kind::power_law) {
        return spec.alpha_star() * std::pow(dot(v, v), 0.5 * spec.p());
    }
    return conjugate_inner_max(spec, t, v).value;
}

void legendre_grad(const HamiltonianSpec& spec, double t, std::span<const double> v,
                   std::span<double> out) {
    check_state(v, "legendre_grad");
    if (spec.kind == HamiltonianSpec::Kind::power_law) {
        const double r = norm2(v);
        if (r == 0.0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        // |grad H*| = (|v|/(alpha q))^{1/(q-1)}
        const double mag = std::pow(r / (spec.alpha * spec.q), 1.0 / (spec.q - 1.0));
        const double factor = mag / r;
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = factor * v[i];
        return;
    }
    const InnerMax inner = conjugate_inner_max(spec, t, v);
    std::copy(inner.u.begin(), inner.u.end(), out.begin());
}

Vec legendre_grad_copy(const HamiltonianSpec& spec, double t, std::span<const double> v) {
    Vec out(v.size(), 0.0);
    legendre_grad(spec, t, v, out);
    return out;
}

double DualityReport::min_slack() const {
    return std::min({slack_euler, slack_growth, slack_conj_euler, slack_conj_upper,
                     slack_conj_lower});
}

DualityReport check_duality_inequalities(const HamiltonianSpec& spec, int samples,
                                         std::uint64_t seed) {
    double alpha = 0.0, q = 0.0;
    if (!spec.growth_exponents(alpha, q))
        throw std::invalid_argument(
            "duality check needs a power law or a caller-supplied growth certificate");
    const double p = q / (q - 1.0);
    const double alpha_star = spec.alpha_star();

    const int dim = 2;
    Rng rng(seed, 7);
    DualityReport report;
    report.samples = samples;
    constexpr double kInf = 1e300;
    report.slack_euler = kInf;
    report.slack_growth = kInf;
    report.slack_conj_euler = kInf;
    report.slack_conj_upper = kInf;
    report.slack_conj_lower = kInf;

    // M* = max of H* on the unit sphere (pointwise norm); equals alpha* for
    // pure powers.
    double m_star = 0.0;
    for (int i = 0; i < std::max(64, samples / 4); ++i) {
        Vec v(dim);
        for (double& x : v) x = rng.normal();
        const double n = norm2(v);
        if (n == 0.0) continue;
        scale_inplace(v, 1.0 / n);
        m_star = std::max(m_star, legendre_value(spec, 0.0, v));
    }
    report.m_star = m_star;

    Vec u(dim), v(dim), g(dim);
    for (int i = 0; i < samples; ++i) {
        const double radius = std::exp(rng.uniform(std::log(0.05), std::log(2.0)));
        for (double& x : u) x = rng.normal();
        const double un = norm2(u);
        if (un == 0.0) continue;
        scale_inplace(u, radius / un);

        const double hu = h_value(spec, 0.0, u);
        h_grad(spec, 0.0, u, g);
        report.slack_euler = std::min(report.slack_euler, dot(g, u) - q * hu);
        report.slack_growth =
            std::min(report.slack_growth, alpha * std::pow(radius, q) - hu);

        for (double& x : v) x = rng.normal();
        const double vn = norm2(v);
        if (vn == 0.0) continue;
        const double vr = std::exp(rng.uniform(std::log(0.05), std::log(2.0)));
        scale_inplace(v, vr / vn);

        const double hv = legendre_value(spec, 0.0, v);
        legendre_grad(spec, 0.0, v, g);
        report.slack_conj_euler = std::min(report.slack_conj_euler, p * hv - dot(g, v));
        report.slack_conj_lower =
            std::min(report.slack_conj_lower, hv - alpha_star * std::pow(vr, p));
        if (vr >= 1.0) {
            report.slack_conj_upper =
                std::min(report.slack_conj_upper, m_star * std::pow(vr, p) - hv);
        }
    }
    return report;
}

}  // namespace rimpact
