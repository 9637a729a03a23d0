#include "rimpact/grid.hpp"

#include <algorithm>
#include <cmath>

namespace rimpact {

void GridSpec::validate() const {
    if (base_nodes < 9) throw std::invalid_argument("grid: base node count must be >= 9");
    if (base_nodes > (1 << 22)) throw std::invalid_argument("grid: base node count too large");
}

int OrbitGrid::segment_of(int node) const {
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (node >= segments[s].begin && node < segments[s].end) return static_cast<int>(s);
    }
    throw std::out_of_range("segment_of: node index out of range");
}

OrbitGrid make_orbit_grid(const GridSpec& spec, double horizon,
                          std::span<const double> impulse_times) {
    spec.validate();
    if (!(horizon > 0.0)) throw std::invalid_argument("grid: horizon must be > 0");
    for (std::size_t j = 0; j < impulse_times.size(); ++j) {
        const double t = impulse_times[j];
        if (!(t > 0.0) || !(t < horizon))
            throw std::invalid_argument("grid: impulse time outside (0, horizon)");
        if (j > 0 && !(t > impulse_times[j - 1]))
            throw std::invalid_argument("grid: impulse times must be strictly increasing");
    }

    OrbitGrid grid;
    grid.horizon = horizon;
    const double h_base = horizon / (spec.base_nodes - 1);

    std::vector<double> bounds;
    bounds.reserve(impulse_times.size() + 2);
    bounds.push_back(0.0);
    bounds.insert(bounds.end(), impulse_times.begin(), impulse_times.end());
    bounds.push_back(horizon);

    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        const double a = bounds[s];
        const double b = bounds[s + 1];
        const double width = b - a;
        const int intervals = std::max<int>(2, static_cast<int>(std::ceil(width / h_base)));
        const double h = width / intervals;

        Segment seg;
        seg.begin = grid.node_count();
        const bool opens_after_impulse = s > 0;
        grid.times.push_back(a);
        grid.sides.push_back(opens_after_impulse ? NodeSide::right : NodeSide::interior);
        for (int i = 1; i < intervals; ++i) {
            grid.times.push_back(a + i * h);
            grid.sides.push_back(NodeSide::interior);
        }
        const bool closes_at_impulse = s + 2 < bounds.size();
        grid.times.push_back(b);
        grid.sides.push_back(closes_at_impulse ? NodeSide::left : NodeSide::interior);
        seg.end = grid.node_count();
        seg.spacing = h;
        grid.segments.push_back(seg);
        if (closes_at_impulse) grid.impulse_left.push_back(seg.end - 1);

        for (int i = seg.begin + 1; i < seg.end; ++i) {
            if (!(grid.times[static_cast<std::size_t>(i)] >
                  grid.times[static_cast<std::size_t>(i - 1)]))
                throw std::invalid_argument(
                    "grid: impulse spacing below floating-point resolution");
        }
    }

    grid.weights.assign(grid.times.size(), 0.0);
    for (const Segment& seg : grid.segments) {
        const int n = seg.size();
        const double h = seg.spacing;
        const bool even_intervals = (n - 1) % 2 == 0;
        if (spec.quadrature == QuadratureRule::simpson && even_intervals && n >= 3) {
            grid.weights[static_cast<std::size_t>(seg.begin)] += h / 3.0;
            grid.weights[static_cast<std::size_t>(seg.end - 1)] += h / 3.0;
            for (int i = 1; i < n - 1; ++i) {
                grid.weights[static_cast<std::size_t>(seg.begin + i)] +=
                    (i % 2 == 1 ? 4.0 : 2.0) * h / 3.0;
            }
        } else {
            grid.weights[static_cast<std::size_t>(seg.begin)] += 0.5 * h;
            grid.weights[static_cast<std::size_t>(seg.end - 1)] += 0.5 * h;
            for (int i = 1; i < n - 1; ++i)
                grid.weights[static_cast<std::size_t>(seg.begin + i)] += h;
        }
    }
    return grid;
}

void apply_derivative(const OrbitGrid& grid, std::span<const double> values, int dim,
                      std::span<double> out) {
    const std::size_t expected = static_cast<std::size_t>(grid.node_count()) * dim;
    if (values.size() != expected || out.size() != expected)
        throw std::invalid_argument("apply_derivative: size mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    detail::visit_derivative_stencil(grid, [&](int row, int col, double coeff) {
        const double* src = values.data() + static_cast<std::size_t>(col) * dim;
        double* dst = out.data() + static_cast<std::size_t>(row) * dim;
        for (int c = 0; c < dim; ++c) dst[c] += coeff * src[c];
    });
}

void apply_derivative_transpose(const OrbitGrid& grid, std::span<const double> covec,
                                int dim, std::span<double> out) {
    const std::size_t expected = static_cast<std::size_t>(grid.node_count()) * dim;
    if (covec.size() != expected || out.size() != expected)
        throw std::invalid_argument("apply_derivative_transpose: size mismatch");
    detail::visit_derivative_stencil(grid, [&](int row, int col, double coeff) {
        const double* src = covec.data() + static_cast<std::size_t>(row) * dim;
        double* dst = out.data() + static_cast<std::size_t>(col) * dim;
        for (int c = 0; c < dim; ++c) dst[c] += coeff * src[c];
    });
}

double quadrature(const OrbitGrid& grid, std::span<const double> nodal) {
    if (nodal.size() != grid.weights.size())
        throw std::invalid_argument("quadrature: size mismatch");
    std::vector<double> terms(nodal.size());
    for (std::size_t i = 0; i < nodal.size(); ++i) terms[i] = grid.weights[i] * nodal[i];
    return pairwise_sum(terms);
}

}  // namespace rimpact
