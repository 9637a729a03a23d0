#include "rimpact/impulse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rimpact/rng.hpp"

namespace rimpact {

namespace {

constexpr int kTailTerms = 512;

double jump_mass_tail(const ImpulseSpec& spec, int from_j) {
    // bound on E sum_{j >= from_j} |b_j| = sum |c_j| E[tau_j]
    double s = 0.0;
    const int limit = spec.intervals.count_limit();
    for (int j = from_j; j < from_j + kTailTerms && j <= limit; ++j) {
        const double term = std::abs(spec.jumps.at(j)) * spec.mean_tau(j);
        s += term;
        if (term < 1e-300) break;
    }
    return s;
}

}  // namespace

int IntervalBounds::count_limit() const {
    switch (kind) {
        case Kind::none: return 0;
        case Kind::explicit_list: return static_cast<int>(values.size());
        case Kind::geometric: return std::numeric_limits<int>::max();
    }
    return 0;
}

double IntervalBounds::at(int j) const {
    switch (kind) {
        case Kind::none: throw std::invalid_argument("interval bounds: empty sequence");
        case Kind::explicit_list: return values.at(static_cast<std::size_t>(j - 1));
        case Kind::geometric: return first * std::pow(ratio, j - 1);
    }
    return 0.0;
}

double JumpCoeffs::at(int j) const {
    if (kind == Kind::explicit_list) {
        if (j < 1 || j > static_cast<int>(values.size())) return 0.0;
        return values[static_cast<std::size_t>(j - 1)];
    }
    const double powj = (poly == 0) ? 1.0 : static_cast<double>(j);
    return amplitude * powj * std::pow(geo, j);
}

void ImpulseSpec::validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("impulse spec: horizon must be > 0");
    if (dimension < 2 || dimension % 2 != 0)
        throw std::invalid_argument("impulse spec: dimension must be even and >= 2");
    if (intervals.kind == IntervalBounds::Kind::explicit_list) {
        for (double d : intervals.values)
            if (!(d > 0.0)) throw std::invalid_argument("impulse spec: interval bound d_j <= 0");
    } else if (intervals.kind == IntervalBounds::Kind::geometric) {
        if (!(intervals.first > 0.0) || !(intervals.ratio > 0.0))
            throw std::invalid_argument("impulse spec: geometric bounds need first, ratio > 0");
    }
    if (tau.kind == TauKind::point_mass && !(tau.fraction > 0.0 && tau.fraction < 1.0))
        throw std::invalid_argument("impulse spec: point mass fraction must lie in (0,1)");
    if (jumps.kind == JumpCoeffs::Kind::poly_geometric && (jumps.poly < 0 || jumps.poly > 1))
        throw std::invalid_argument("impulse spec: poly exponent must be 0 or 1");
    if (!direction.empty() && static_cast<int>(direction.size()) != dimension)
        throw std::invalid_argument("impulse spec: direction dimension mismatch");
    if (!direction.empty() && norm2(direction) == 0.0)
        throw std::invalid_argument("impulse spec: direction must be nonzero");
    if (max_impulses < 0) throw std::invalid_argument("impulse spec: max_impulses < 0");
    if (!(min_separation_rel > 0.0))
        throw std::invalid_argument("impulse spec: min_separation_rel must be > 0");
}

Vec ImpulseSpec::unit_direction() const {
    Vec e(static_cast<std::size_t>(dimension), 0.0);
    if (direction.empty()) {
        e[0] = 1.0;
        return e;
    }
    const double n = norm2(direction);
    for (int i = 0; i < dimension; ++i) e[static_cast<std::size_t>(i)] = direction[static_cast<std::size_t>(i)] / n;
    return e;
}

double ImpulseSpec::mean_tau(int j) const {
    const double d = intervals.at(j);
    return tau.kind == TauKind::uniform ? 0.5 * d : tau.fraction * d;
}

SampleOrbit sample_orbit(const ImpulseSpec& spec, std::uint64_t seed, std::uint64_t orbit_index) {
    spec.validate();
    Rng rng(seed, orbit_index);
    SampleOrbit orbit;
    orbit.horizon = spec.horizon;
    orbit.seed = seed;
    orbit.orbit_index = orbit_index;

    const Vec dir = spec.unit_direction();
    const double min_sep = spec.min_separation_rel * spec.horizon;
    const int limit = std::min(spec.max_impulses, spec.intervals.count_limit());

    double t = 0.0;
    int j = 1;
    for (; j <= limit; ++j) {
        const double d = spec.intervals.at(j);
        const double tau = (spec.tau.kind == TauKind::uniform) ? rng.uniform(0.0, d)
                                                               : spec.tau.fraction * d;
        if (tau < min_sep) {
            orbit.truncation = OrbitTruncation::resolution;
            orbit.tail_mass_bound = jump_mass_tail(spec, j);
            return orbit;
        }
        const double next = t + tau;
        if (next >= spec.horizon - min_sep) {
            orbit.truncation = OrbitTruncation::horizon;
            return orbit;
        }
        t = next;
        orbit.times.push_back(t);
        orbit.draws.push_back(tau);
        Vec jump(dir);
        scale_inplace(jump, spec.jumps.at(j) * tau);
        orbit.jumps.push_back(std::move(jump));
    }
    if (limit == spec.intervals.count_limit() && spec.intervals.finite()) {
        orbit.truncation = OrbitTruncation::exhausted;
    } else {
        orbit.truncation = OrbitTruncation::interval_cap;
        orbit.tail_mass_bound = jump_mass_tail(spec, j);
    }
    return orbit;
}

std::vector<SampleOrbit> sample_ensemble(const ImpulseSpec& spec, int n_orbits, std::uint64_t seed) {
    if (n_orbits < 1) throw std::invalid_argument("ensemble needs n_orbits >= 1");
    std::vector<SampleOrbit> orbits;
    orbits.reserve(static_cast<std::size_t>(n_orbits));
    for (int i = 0; i < n_orbits; ++i)
        orbits.push_back(sample_orbit(spec, seed, static_cast<std::uint64_t>(i)));
    return orbits;
}

int counting_process(const SampleOrbit& orbit, double t) {
    if (!(t >= 0.0) || !(t <= orbit.horizon))
        throw std::domain_error("counting_process: t outside [0, horizon]");
    const auto it = std::upper_bound(orbit.times.begin(), orbit.times.end(), t);
    return static_cast<int>(it - orbit.times.begin());
}

BEstimate estimate_B(const ImpulseSpec& spec, int n_orbits, std::uint64_t seed) {
    if (n_orbits < 1) throw std::invalid_argument("estimate_B needs n_orbits >= 1");
    std::vector<double> mass(static_cast<std::size_t>(n_orbits), 0.0);
    for (int i = 0; i < n_orbits; ++i) {
        const SampleOrbit orbit = sample_orbit(spec, seed, static_cast<std::uint64_t>(i));
        double s = 0.0;
        for (const Vec& jump : orbit.jumps) s += norm2(jump);
        mass[static_cast<std::size_t>(i)] = s;
    }
    BEstimate est;
    est.n_orbits = n_orbits;
    est.mc_mean = pairwise_sum(mass) / n_orbits;
    if (n_orbits > 1) {
        std::vector<double> sq(mass.size());
        for (std::size_t i = 0; i < mass.size(); ++i) {
            const double d = mass[i] - est.mc_mean;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(sq) / (n_orbits - 1);
        est.mc_stderr = std::sqrt(var / n_orbits);
    }
    return est;
}

bool analytic_B_bound_available(const ImpulseSpec& spec) {
    if (spec.intervals.kind == IntervalBounds::Kind::none) return true;
    if (spec.jumps.kind == JumpCoeffs::Kind::explicit_list) return true;
    if (spec.jumps.amplitude == 0.0) return true;
    if (spec.intervals.finite()) return true;
    return std::abs(spec.jumps.geo) < 1.0;
}

double analytic_B_bound(const ImpulseSpec& spec) {
    spec.validate();
    if (spec.intervals.kind == IntervalBounds::Kind::none) return 0.0;
    if (spec.jumps.kind == JumpCoeffs::Kind::explicit_list) {
        double s = 0.0;
        int n = static_cast<int>(spec.jumps.values.size());
        if (spec.intervals.finite()) n = std::min(n, spec.intervals.count_limit());
        for (int j = 1; j <= n; ++j) s += std::abs(spec.jumps.at(j));
        return s;
    }
    const double a = std::abs(spec.jumps.amplitude);
    if (a == 0.0) return 0.0;
    const double g = spec.jumps.geo;
    if (spec.intervals.finite()) return b_bound_partial(spec, spec.intervals.count_limit());
    if (!(std::abs(g) < 1.0))
        throw UnsupportedSpecError("analytic_B_bound: geometric jump ratio must satisfy |g| < 1");
    // sum_j a g^j = a g/(1-g); sum_j a j g^j = a g/(1-g)^2
    const double one_minus = 1.0 - g;
    return spec.jumps.poly == 0 ? a * g / one_minus : a * g / (one_minus * one_minus);
}

double b_bound_partial(const ImpulseSpec& spec, int k) {
    double s = 0.0;
    for (int j = 1; j <= k; ++j) s += std::abs(spec.jumps.at(j));
    return s;
}

}  // namespace rimpact
