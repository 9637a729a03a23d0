#include "rimpact/action.hpp"

#include <cmath>
#include <stdexcept>

namespace rimpact {

namespace detail {

void check_process_orbits(const EnsembleProcess& v, std::span<const SampleOrbit> orbits) {
    v.require_nonempty();
    if (static_cast<std::size_t>(v.n_orbits()) != orbits.size())
        throw std::invalid_argument("action: process/orbit count mismatch");
    for (int o = 0; o < v.n_orbits(); ++o) {
        const OrbitPath& path = v.orbits[static_cast<std::size_t>(o)];
        const SampleOrbit& orbit = orbits[static_cast<std::size_t>(o)];
        if (path.grid.impulse_left.size() != orbit.times.size())
            throw std::invalid_argument("action: grid impulse nodes do not match orbit");
        for (std::size_t j = 0; j < orbit.times.size(); ++j) {
            const int node = path.grid.impulse_left[j];
            if (path.grid.times[static_cast<std::size_t>(node)] != orbit.times[j])
                throw std::invalid_argument("action: impulse time mismatch");
        }
    }
}

// Terms containing v' live on cell midpoints inside segments (v' is a plain
// difference quotient there, never straddling an impulse pair); the cell
// structure makes the exact derivative of the discrete functional a clean
// O(h)-consistent covector, without the endpoint oscillations a collocation
// transpose would produce.
void chi_covector_orbit(const OrbitPath& v, const HamiltonianSpec& spec,
                        const SampleOrbit& orbit, std::vector<double>& r) {
    const int dim = v.dim;
    const int n = v.grid.node_count();
    const std::size_t total = static_cast<std::size_t>(n) * dim;
    r.assign(total, 0.0);

    Vec d(static_cast<std::size_t>(dim), 0.0);   // cell difference quotient
    Vec a(static_cast<std::size_t>(dim), 0.0);   // cell average
    Vec jd(static_cast<std::size_t>(dim), 0.0);
    Vec ja(static_cast<std::size_t>(dim), 0.0);
    Vec grad(static_cast<std::size_t>(dim), 0.0);
    for (const Segment& seg : v.grid.segments) {
        const double h = seg.spacing;
        for (int i = seg.begin; i + 1 < seg.end; ++i) {
            const double tc = 0.5 * (v.grid.times[static_cast<std::size_t>(i)] +
                                     v.grid.times[static_cast<std::size_t>(i + 1)]);
            const auto vl = v.node(i);
            const auto vr = v.node(i + 1);
            for (int c = 0; c < dim; ++c) {
                d[static_cast<std::size_t>(c)] =
                    (vr[static_cast<std::size_t>(c)] - vl[static_cast<std::size_t>(c)]) / h;
                a[static_cast<std::size_t>(c)] =
                    0.5 * (vl[static_cast<std::size_t>(c)] + vr[static_cast<std::size_t>(c)]);
            }
            apply_j(d, jd);
            apply_j(a, ja);
            legendre_grad(spec, tc, d, grad);
            // cell energy F = h [ 1/2 (J d, a) + H*(tc, d) ]
            double* rl = r.data() + static_cast<std::size_t>(i) * dim;
            double* rr = r.data() + static_cast<std::size_t>(i + 1) * dim;
            for (int c = 0; c < dim; ++c) {
                const double side = 0.5 * ja[static_cast<std::size_t>(c)] +
                                    0.25 * h * jd[static_cast<std::size_t>(c)];
                rl[c] += side - grad[static_cast<std::size_t>(c)];
                rr[c] += -0.5 * ja[static_cast<std::size_t>(c)] +
                         0.25 * h * jd[static_cast<std::size_t>(c)] +
                         grad[static_cast<std::size_t>(c)];
            }
        }
    }

    // impulse pairing acts on the left copy of each xi_j
    for (std::size_t j = 0; j < orbit.jumps.size(); ++j) {
        const int node = v.grid.impulse_left[j];
        double* ri = r.data() + static_cast<std::size_t>(node) * dim;
        for (int c = 0; c < dim; ++c) ri[c] += 0.5 * orbit.jumps[j][static_cast<std::size_t>(c)];
    }
}

}  // namespace detail

namespace {

struct OrbitTerms {
    double symplectic = 0.0;
    double conjugate = 0.0;
    double impulse = 0.0;
};

OrbitTerms chi_terms_orbit(const OrbitPath& v, const HamiltonianSpec& spec,
                           const SampleOrbit& orbit) {
    const int dim = v.dim;
    Vec d(static_cast<std::size_t>(dim), 0.0);
    Vec a(static_cast<std::size_t>(dim), 0.0);
    Vec jd(static_cast<std::size_t>(dim), 0.0);
    std::vector<double> sym;
    std::vector<double> conj;
    for (const Segment& seg : v.grid.segments) {
        const double h = seg.spacing;
        for (int i = seg.begin; i + 1 < seg.end; ++i) {
            const double tc = 0.5 * (v.grid.times[static_cast<std::size_t>(i)] +
                                     v.grid.times[static_cast<std::size_t>(i + 1)]);
            const auto vl = v.node(i);
            const auto vr = v.node(i + 1);
            for (int c = 0; c < dim; ++c) {
                d[static_cast<std::size_t>(c)] =
                    (vr[static_cast<std::size_t>(c)] - vl[static_cast<std::size_t>(c)]) / h;
                a[static_cast<std::size_t>(c)] =
                    0.5 * (vl[static_cast<std::size_t>(c)] + vr[static_cast<std::size_t>(c)]);
            }
            apply_j(d, jd);
            sym.push_back(0.5 * h * dot(jd, a));
            conj.push_back(h * legendre_value(spec, tc, d));
        }
    }
    OrbitTerms terms;
    terms.symplectic = pairwise_sum(sym);
    terms.conjugate = pairwise_sum(conj);
    std::vector<double> imp(orbit.jumps.size(), 0.0);
    for (std::size_t j = 0; j < orbit.jumps.size(); ++j)
        imp[j] = 0.5 * dot(v.node(v.grid.impulse_left[j]), orbit.jumps[j]);
    terms.impulse = pairwise_sum(imp);
    return terms;
}

double gradient_norm_from_covectors(const EnsembleProcess& v,
                                    const std::vector<std::vector<double>>& covectors) {
    // ||g||^2 = (1/N) sum_o sum_free |r_m|^2 / w_m with boundary nodes fixed
    const int n_orb = v.n_orbits();
    std::vector<double> per_orbit(static_cast<std::size_t>(n_orb), 0.0);
    for (int o = 0; o < n_orb; ++o) {
        const OrbitPath& path = v.orbits[static_cast<std::size_t>(o)];
        const std::vector<double>& r = covectors[static_cast<std::size_t>(o)];
        const int n = path.grid.node_count();
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            const double w = path.grid.weights[static_cast<std::size_t>(i)];
            double s = 0.0;
            for (int c = 0; c < path.dim; ++c) {
                const double ri = r[static_cast<std::size_t>(i) * path.dim + c];
                s += ri * ri;
            }
            acc[static_cast<std::size_t>(i)] = s / w;
        }
        per_orbit[static_cast<std::size_t>(o)] = pairwise_sum(acc);
    }
    return std::sqrt(pairwise_sum(per_orbit) / n_orb);
}

void check_dirichlet(const EnsembleProcess& h) {
    for (const OrbitPath& path : h.orbits) {
        const int last = path.grid.node_count() - 1;
        double scale = 0.0;
        for (double x : path.values) scale = std::max(scale, std::abs(x));
        const double tol = 1e-12 * (1.0 + scale);
        if (norm2(path.node(0)) > tol || norm2(path.node(last)) > tol)
            throw std::invalid_argument("chi_pairing: direction violates h(0) = h(T) = 0");
    }
}

}  // namespace

double phi(const EnsembleProcess& u, const HamiltonianSpec& spec,
           std::span<const SampleOrbit> orbits) {
    detail::check_process_orbits(u, orbits);
    const int n_orb = u.n_orbits();
    std::vector<double> per_orbit(static_cast<std::size_t>(n_orb), 0.0);
    Vec d(static_cast<std::size_t>(u.dim), 0.0);
    Vec avg(static_cast<std::size_t>(u.dim), 0.0);
    Vec jd(static_cast<std::size_t>(u.dim), 0.0);
    Vec ju(static_cast<std::size_t>(u.dim), 0.0);
    for (int o = 0; o < n_orb; ++o) {
        const OrbitPath& path = u.orbits[static_cast<std::size_t>(o)];
        const SampleOrbit& orbit = orbits[static_cast<std::size_t>(o)];
        const int n = path.grid.node_count();
        // -int H(t,u) dt on nodes, -1/2 int (J u', u) dt on cells
        std::vector<double> nodal(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            const double t = path.grid.times[static_cast<std::size_t>(i)];
            nodal[static_cast<std::size_t>(i)] = -h_value(spec, t, path.node(i));
        }
        double total = quadrature(path.grid, nodal);
        std::vector<double> cells;
        for (const Segment& seg : path.grid.segments) {
            const double h = seg.spacing;
            for (int i = seg.begin; i + 1 < seg.end; ++i) {
                const auto ul = path.node(i);
                const auto ur = path.node(i + 1);
                for (int c = 0; c < u.dim; ++c) {
                    d[static_cast<std::size_t>(c)] =
                        (ur[static_cast<std::size_t>(c)] - ul[static_cast<std::size_t>(c)]) / h;
                    avg[static_cast<std::size_t>(c)] =
                        0.5 * (ul[static_cast<std::size_t>(c)] + ur[static_cast<std::size_t>(c)]);
                }
                apply_j(d, jd);
                cells.push_back(-0.5 * h * dot(jd, avg));
            }
        }
        total += pairwise_sum(cells);
        std::vector<double> imp(orbit.jumps.size(), 0.0);
        for (std::size_t j = 0; j < orbit.jumps.size(); ++j) {
            apply_j(path.node(path.grid.impulse_left[j]), ju);
            imp[j] = -0.5 * dot(ju, orbit.jumps[j]);
        }
        per_orbit[static_cast<std::size_t>(o)] = total + pairwise_sum(imp);
    }
    return pairwise_sum(per_orbit) / n_orb;
}

ChiReport chi(const EnsembleProcess& v, const HamiltonianSpec& spec,
              std::span<const SampleOrbit> orbits, bool with_gradient) {
    detail::check_process_orbits(v, orbits);
    const int n_orb = v.n_orbits();
    std::vector<double> sym(static_cast<std::size_t>(n_orb));
    std::vector<double> conj(static_cast<std::size_t>(n_orb));
    std::vector<double> imp(static_cast<std::size_t>(n_orb));
    for (int o = 0; o < n_orb; ++o) {
        const OrbitTerms terms = chi_terms_orbit(v.orbits[static_cast<std::size_t>(o)], spec,
                                                 orbits[static_cast<std::size_t>(o)]);
        sym[static_cast<std::size_t>(o)] = terms.symplectic;
        conj[static_cast<std::size_t>(o)] = terms.conjugate;
        imp[static_cast<std::size_t>(o)] = terms.impulse;
    }
    ChiReport report;
    report.term_symplectic = pairwise_sum(sym) / n_orb;
    report.term_conjugate = pairwise_sum(conj) / n_orb;
    report.term_impulse = pairwise_sum(imp) / n_orb;
    report.chi_value = report.term_symplectic + report.term_conjugate + report.term_impulse;
    if (with_gradient) {
        std::vector<std::vector<double>> covectors(static_cast<std::size_t>(n_orb));
        for (int o = 0; o < n_orb; ++o)
            detail::chi_covector_orbit(v.orbits[static_cast<std::size_t>(o)], spec,
                                       orbits[static_cast<std::size_t>(o)],
                                       covectors[static_cast<std::size_t>(o)]);
        report.gradient_norm = gradient_norm_from_covectors(v, covectors);
    }
    return report;
}

double chi_value(const EnsembleProcess& v, const HamiltonianSpec& spec,
                 std::span<const SampleOrbit> orbits) {
    return chi(v, spec, orbits, false).chi_value;
}

double chi_pairing(const EnsembleProcess& v, const EnsembleProcess& h,
                   const HamiltonianSpec& spec, std::span<const SampleOrbit> orbits) {
    detail::check_process_orbits(v, orbits);
    v.require_compatible(h);
    check_dirichlet(h);
    const int n_orb = v.n_orbits();
    std::vector<double> per_orbit(static_cast<std::size_t>(n_orb), 0.0);
    std::vector<double> r;
    for (int o = 0; o < n_orb; ++o) {
        detail::chi_covector_orbit(v.orbits[static_cast<std::size_t>(o)], spec,
                                   orbits[static_cast<std::size_t>(o)], r);
        const OrbitPath& hp = h.orbits[static_cast<std::size_t>(o)];
        const int n = hp.grid.node_count();
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            double s = 0.0;
            for (int c = 0; c < hp.dim; ++c)
                s += r[static_cast<std::size_t>(i) * hp.dim + c] *
                     hp.values[static_cast<std::size_t>(i) * hp.dim + c];
            acc[static_cast<std::size_t>(i)] = s;
        }
        per_orbit[static_cast<std::size_t>(o)] = pairwise_sum(acc);
    }
    return pairwise_sum(per_orbit) / n_orb;
}

EnsembleProcess chi_gradient(const EnsembleProcess& v, const HamiltonianSpec& spec,
                             std::span<const SampleOrbit> orbits, double* gradient_norm) {
    detail::check_process_orbits(v, orbits);
    EnsembleProcess g = v;
    g.dirichlet = true;
    const int n_orb = v.n_orbits();
    std::vector<std::vector<double>> covectors(static_cast<std::size_t>(n_orb));
    for (int o = 0; o < n_orb; ++o) {
        detail::chi_covector_orbit(v.orbits[static_cast<std::size_t>(o)], spec,
                                   orbits[static_cast<std::size_t>(o)],
                                   covectors[static_cast<std::size_t>(o)]);
        OrbitPath& path = g.orbits[static_cast<std::size_t>(o)];
        const std::vector<double>& r = covectors[static_cast<std::size_t>(o)];
        const int n = path.grid.node_count();
        std::fill(path.values.begin(), path.values.end(), 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            const double w = path.grid.weights[static_cast<std::size_t>(i)];
            for (int c = 0; c < path.dim; ++c)
                path.values[static_cast<std::size_t>(i) * path.dim + c] =
                    r[static_cast<std::size_t>(i) * path.dim + c] / w;
        }
    }
    if (gradient_norm) *gradient_norm = gradient_norm_from_covectors(v, covectors);
    return g;
}

}  // namespace rimpact
