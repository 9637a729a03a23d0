#include "rimpact/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "rimpact/rng.hpp"

namespace rimpact {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_same_layout(const OrbitPath& a, const OrbitPath& b) {
    if (a.dim != b.dim || a.grid.node_count() != b.grid.node_count())
        throw std::invalid_argument("ensemble: orbit grid shape mismatch");
    if (!std::equal(a.grid.times.begin(), a.grid.times.end(), b.grid.times.begin()))
        throw std::invalid_argument("ensemble: orbit grid times mismatch");
}

}  // namespace

void EnsembleProcess::require_nonempty() const {
    if (orbits.empty()) throw std::invalid_argument("ensemble: empty");
}

void EnsembleProcess::require_compatible(const EnsembleProcess& other) const {
    if (n_orbits() != other.n_orbits() || dim != other.dim || horizon != other.horizon)
        throw std::invalid_argument("ensemble: incompatible shapes");
    for (int o = 0; o < n_orbits(); ++o)
        check_same_layout(orbits[static_cast<std::size_t>(o)],
                          other.orbits[static_cast<std::size_t>(o)]);
}

EnsembleProcess make_ensemble(const GridSpec& grid, double horizon, int dim,
                              std::span<const SampleOrbit> orbits) {
    if (orbits.empty()) throw std::invalid_argument("ensemble: needs at least one orbit");
    EnsembleProcess x;
    x.horizon = horizon;
    x.dim = dim;
    x.orbits.reserve(orbits.size());
    for (const SampleOrbit& orbit : orbits) {
        OrbitPath path;
        path.grid = make_orbit_grid(grid, horizon, orbit.times);
        path.dim = dim;
        path.values.assign(static_cast<std::size_t>(path.grid.node_count()) * dim, 0.0);
        x.orbits.push_back(std::move(path));
    }
    return x;
}

EnsembleProcess make_deterministic(const GridSpec& grid, double horizon, int dim) {
    SampleOrbit empty;
    empty.horizon = horizon;
    return make_ensemble(grid, horizon, dim, std::span<const SampleOrbit>(&empty, 1));
}

void fill_from_function(EnsembleProcess& x,
                        const std::function<void(double, std::span<double>)>& f,
                        bool dirichlet) {
    for (OrbitPath& path : x.orbits) {
        const int n = path.grid.node_count();
        for (int i = 0; i < n; ++i) f(path.grid.times[static_cast<std::size_t>(i)], path.node(i));
        if (dirichlet) {
            std::fill(path.node(0).begin(), path.node(0).end(), 0.0);
            std::fill(path.node(n - 1).begin(), path.node(n - 1).end(), 0.0);
        }
    }
    x.dirichlet = dirichlet;
}

EnsembleProcess scaled(const EnsembleProcess& x, double alpha) {
    EnsembleProcess out = x;
    for (OrbitPath& path : out.orbits)
        for (double& v : path.values) v *= alpha;
    return out;
}

EnsembleProcess sum(const EnsembleProcess& x, const EnsembleProcess& y) {
    x.require_compatible(y);
    EnsembleProcess out = x;
    for (std::size_t o = 0; o < out.orbits.size(); ++o)
        for (std::size_t i = 0; i < out.orbits[o].values.size(); ++i)
            out.orbits[o].values[i] += y.orbits[o].values[i];
    out.dirichlet = x.dirichlet && y.dirichlet;
    return out;
}

EnsembleProcess difference(const EnsembleProcess& x, const EnsembleProcess& y) {
    x.require_compatible(y);
    EnsembleProcess out = x;
    for (std::size_t o = 0; o < out.orbits.size(); ++o)
        for (std::size_t i = 0; i < out.orbits[o].values.size(); ++i)
            out.orbits[o].values[i] -= y.orbits[o].values[i];
    out.dirichlet = x.dirichlet && y.dirichlet;
    return out;
}

void add_scaled(EnsembleProcess& x, double alpha, const EnsembleProcess& y) {
    x.require_compatible(y);
    for (std::size_t o = 0; o < x.orbits.size(); ++o)
        for (std::size_t i = 0; i < x.orbits[o].values.size(); ++i)
            x.orbits[o].values[i] += alpha * y.orbits[o].values[i];
}

void eval_orbit(const OrbitPath& path, double t, NodeSide side, std::span<double> out) {
    const auto& times = path.grid.times;
    const int n = path.grid.node_count();
    if (t <= times.front()) {
        const auto v = path.node(0);
        std::copy(v.begin(), v.end(), out.begin());
        return;
    }
    if (t >= times.back()) {
        const auto v = path.node(n - 1);
        std::copy(v.begin(), v.end(), out.begin());
        return;
    }
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    int i = static_cast<int>(it - times.begin());
    if (times[static_cast<std::size_t>(i)] == t) {
        // paired node: lower index is the left copy
        if (i + 1 < n && times[static_cast<std::size_t>(i + 1)] == t && side == NodeSide::right)
            ++i;
        const auto v = path.node(i);
        std::copy(v.begin(), v.end(), out.begin());
        return;
    }
    const double t1 = times[static_cast<std::size_t>(i)];
    const double t0 = times[static_cast<std::size_t>(i - 1)];
    const double w = (t - t0) / (t1 - t0);
    const auto a = path.node(i - 1);
    const auto b = path.node(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 - w) * a[c] + w * b[c];
}

double pc_norm(const EnsembleProcess& x) {
    x.require_nonempty();
    const int n_orb = x.n_orbits();
    Vec tmp(static_cast<std::size_t>(x.dim));
    std::vector<double> sq(static_cast<std::size_t>(n_orb));
    double best = 0.0;
    for (int o = 0; o < n_orb; ++o) {
        const OrbitPath& owner = x.orbits[static_cast<std::size_t>(o)];
        for (int i = 0; i < owner.grid.node_count(); ++i) {
            const double t = owner.grid.times[static_cast<std::size_t>(i)];
            const NodeSide side = owner.grid.sides[static_cast<std::size_t>(i)];
            for (int p = 0; p < n_orb; ++p) {
                if (p == o) {
                    const auto v = owner.node(i);
                    sq[static_cast<std::size_t>(p)] = dot(v, v);
                } else {
                    eval_orbit(x.orbits[static_cast<std::size_t>(p)], t, side, tmp);
                    sq[static_cast<std::size_t>(p)] = dot(tmp, tmp);
                }
            }
            best = std::max(best, pairwise_sum(sq) / n_orb);
        }
    }
    return std::sqrt(best);
}

double pc1_norm(const EnsembleProcess& x) {
    return std::max(pc_norm(x), pc_norm(derivative(x)));
}

EnsembleProcess derivative(const EnsembleProcess& x) {
    x.require_nonempty();
    EnsembleProcess out = x;
    for (std::size_t o = 0; o < x.orbits.size(); ++o) {
        apply_derivative(x.orbits[o].grid, x.orbits[o].values, x.dim, out.orbits[o].values);
    }
    out.dirichlet = false;
    return out;
}

double inner_product(const EnsembleProcess& x, const EnsembleProcess& y) {
    x.require_nonempty();
    x.require_compatible(y);
    const int n_orb = x.n_orbits();
    std::vector<double> per_orbit(static_cast<std::size_t>(n_orb));
    for (int o = 0; o < n_orb; ++o) {
        const OrbitPath& a = x.orbits[static_cast<std::size_t>(o)];
        const OrbitPath& b = y.orbits[static_cast<std::size_t>(o)];
        std::vector<double> nodal(static_cast<std::size_t>(a.grid.node_count()));
        for (int i = 0; i < a.grid.node_count(); ++i)
            nodal[static_cast<std::size_t>(i)] = dot(a.node(i), b.node(i));
        per_orbit[static_cast<std::size_t>(o)] = quadrature(a.grid, nodal);
    }
    return pairwise_sum(per_orbit) / n_orb;
}

double expectation_cs_min_slack(const EnsembleProcess& x, const EnsembleProcess& y) {
    x.require_nonempty();
    x.require_compatible(y);
    const int n_orb = x.n_orbits();
    Vec tx(static_cast<std::size_t>(x.dim));
    Vec ty(static_cast<std::size_t>(x.dim));
    std::vector<double> ax(static_cast<std::size_t>(n_orb));
    std::vector<double> ay(static_cast<std::size_t>(n_orb));
    std::vector<double> axy(static_cast<std::size_t>(n_orb));
    double min_slack = 1e300;
    for (int o = 0; o < n_orb; ++o) {
        const OrbitPath& owner = x.orbits[static_cast<std::size_t>(o)];
        for (int i = 0; i < owner.grid.node_count(); ++i) {
            const double t = owner.grid.times[static_cast<std::size_t>(i)];
            const NodeSide side = owner.grid.sides[static_cast<std::size_t>(i)];
            for (int p = 0; p < n_orb; ++p) {
                eval_orbit(x.orbits[static_cast<std::size_t>(p)], t, side, tx);
                eval_orbit(y.orbits[static_cast<std::size_t>(p)], t, side, ty);
                const double nx = norm2(tx);
                const double ny = norm2(ty);
                ax[static_cast<std::size_t>(p)] = nx * nx;
                ay[static_cast<std::size_t>(p)] = ny * ny;
                axy[static_cast<std::size_t>(p)] = nx * ny;
            }
            const double ex2 = pairwise_sum(ax) / n_orb;
            const double ey2 = pairwise_sum(ay) / n_orb;
            const double exy = pairwise_sum(axy) / n_orb;
            min_slack = std::min(min_slack, ex2 * ey2 - exy * exy);
        }
    }
    return min_slack;
}

void fill_random_sines(EnsembleProcess& x, int modes, Rng& rng) {
    std::vector<double> coeff(static_cast<std::size_t>(modes * x.dim));
    for (double& c : coeff) c = rng.normal();
    const double horizon = x.horizon;
    const int dim = x.dim;
    fill_from_function(
        x,
        [&, horizon, dim](double t, std::span<double> out) {
            for (int c = 0; c < dim; ++c) {
                double v = 0.0;
                for (int k = 1; k <= modes; ++k)
                    v += coeff[static_cast<std::size_t>((k - 1) * dim + c)] *
                         std::sin(k * kPi * t / horizon);
                out[static_cast<std::size_t>(c)] = v;
            }
        },
        true);
}

double nodal_sup_norm(const EnsembleProcess& x) {
    double m = 0.0;
    for (const OrbitPath& path : x.orbits)
        for (int i = 0; i < path.grid.node_count(); ++i)
            m = std::max(m, norm2(path.node(i)));
    return m;
}

double nodal_sup_pc1(const EnsembleProcess& x) {
    return std::max(nodal_sup_norm(x), nodal_sup_norm(derivative(x)));
}

std::string ensemble_to_csv(const EnsembleProcess& x, const std::string& component_prefix) {
    x.require_nonempty();
    std::string out = "orbit_id,t,side";
    for (int c = 1; c <= x.dim; ++c) out += "," + component_prefix + std::to_string(c);
    out += "\n";
    char buf[40];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out += buf;
    };
    for (int o = 0; o < x.n_orbits(); ++o) {
        const OrbitPath& path = x.orbits[static_cast<std::size_t>(o)];
        for (int i = 0; i < path.grid.node_count(); ++i) {
            out += std::to_string(o);
            out += ',';
            put(path.grid.times[static_cast<std::size_t>(i)]);
            switch (path.grid.sides[static_cast<std::size_t>(i)]) {
                case NodeSide::interior: out += ",interior"; break;
                case NodeSide::left: out += ",left"; break;
                case NodeSide::right: out += ",right"; break;
            }
            for (int c = 0; c < x.dim; ++c) {
                out += ',';
                put(path.node(i)[static_cast<std::size_t>(c)]);
            }
            out += '\n';
        }
    }
    return out;
}

void ensemble_values_from_csv(EnsembleProcess& x, const std::string& text) {
    x.require_nonempty();
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos) throw std::invalid_argument("ensemble csv: missing header");
    ++pos;
    for (int o = 0; o < x.n_orbits(); ++o) {
        OrbitPath& path = x.orbits[static_cast<std::size_t>(o)];
        for (int i = 0; i < path.grid.node_count(); ++i) {
            const std::size_t end = text.find('\n', pos);
            if (end == std::string::npos)
                throw std::invalid_argument("ensemble csv: too few rows");
            const std::string line = text.substr(pos, end - pos);
            pos = end + 1;
            std::vector<double> cells;
            std::string side;
            std::size_t cursor = 0;
            int column = 0;
            while (cursor <= line.size()) {
                std::size_t comma = line.find(',', cursor);
                if (comma == std::string::npos) comma = line.size();
                const std::string cell = line.substr(cursor, comma - cursor);
                if (column == 2) side = cell;
                else cells.push_back(std::strtod(cell.c_str(), nullptr));
                cursor = comma + 1;
                ++column;
            }
            if (cells.size() != static_cast<std::size_t>(2 + x.dim))
                throw std::invalid_argument("ensemble csv: column count mismatch");
            if (cells[1] != path.grid.times[static_cast<std::size_t>(i)])
                throw std::invalid_argument("ensemble csv: node time mismatch");
            for (int c = 0; c < x.dim; ++c)
                path.node(i)[static_cast<std::size_t>(c)] = cells[static_cast<std::size_t>(2 + c)];
        }
    }
    if (pos < text.size() && text.find_first_not_of(" \n", pos) != std::string::npos)
        throw std::invalid_argument("ensemble csv: too many rows");
}

KEstimate estimate_K(const GridSpec& grid, TrialFamily family, int samples,
                     std::uint64_t seed, double horizon, int dim, double safety) {
    if (samples < 1) throw std::invalid_argument("estimate_K: samples >= 1 required");
    Rng rng(seed, 11);
    KEstimate est;
    est.trials = samples;
    est.family = family == TrialFamily::sine_modes    ? "sine_modes"
                 : family == TrialFamily::pinned_cubics ? "pinned_cubics"
                                                        : "mixed";
    constexpr int kModes = 6;
    for (int trial = 0; trial < samples; ++trial) {
        EnsembleProcess x = make_deterministic(grid, horizon, dim);
        const bool use_sine =
            family == TrialFamily::sine_modes ||
            (family == TrialFamily::mixed && trial % 2 == 0) || trial == 0;
        if (use_sine) {
            std::vector<double> coeff(static_cast<std::size_t>(kModes * dim), 0.0);
            if (trial == 0) {
                coeff[0] = 1.0;  // pure first mode as the reference trial
            } else {
                for (double& c : coeff) c = rng.normal();
            }
            fill_from_function(
                x,
                [&](double t, std::span<double> out) {
                    for (int c = 0; c < dim; ++c) {
                        double v = 0.0;
                        for (int k = 1; k <= kModes; ++k)
                            v += coeff[static_cast<std::size_t>((k - 1) * dim + c)] *
                                 std::sin(k * kPi * t / horizon);
                        out[static_cast<std::size_t>(c)] = v;
                    }
                },
                true);
        } else {
            std::vector<double> c0(static_cast<std::size_t>(dim));
            std::vector<double> c1(static_cast<std::size_t>(dim));
            for (double& c : c0) c = rng.normal();
            for (double& c : c1) c = rng.normal();
            fill_from_function(
                x,
                [&](double t, std::span<double> out) {
                    const double base = t * (horizon - t);
                    for (int c = 0; c < dim; ++c)
                        out[static_cast<std::size_t>(c)] =
                            base * (c0[static_cast<std::size_t>(c)] +
                                    c1[static_cast<std::size_t>(c)] * t);
                },
                true);
        }
        const double denom = pc_norm(derivative(x));
        if (denom < 1e-14) continue;  // zero-derivative trial: skipped
        const double ratio = pc1_norm(x) / denom;
        if (ratio > est.k_lower) {
            est.k_lower = ratio;
            est.best_trial = trial;
        }
    }
    est.k_working = est.k_lower * safety;
    return est;
}

}  // namespace rimpact
