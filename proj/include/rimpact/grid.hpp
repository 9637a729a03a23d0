#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rimpact/vec.hpp"

namespace rimpact {

enum class QuadratureRule { trapezoid, simpson };
enum class DerivativeScheme { central };

struct GridSpec {
    int base_nodes = 65;  // M + 1, >= 9
    QuadratureRule quadrature = QuadratureRule::trapezoid;
    DerivativeScheme derivative = DerivativeScheme::central;

    void validate() const;
};

enum class NodeSide : std::uint8_t { interior, left, right };

// Contiguous run of uniformly spaced nodes between two impulse times (or the
// horizon ends). Node index range is [begin, end).
struct Segment {
    int begin = 0;
    int end = 0;
    double spacing = 0.0;

    int size() const { return end - begin; }
};

// Per-orbit time grid. Impulse times appear as paired nodes: the left copy
// closes one segment, the right copy opens the next, and nothing is ever
// interpolated or differentiated across the pair.
struct OrbitGrid {
    double horizon = 0.0;
    std::vector<double> times;
    std::vector<NodeSide> sides;
    std::vector<Segment> segments;
    std::vector<int> impulse_left;  // node index of the left copy of xi_j
    std::vector<double> weights;    // quadrature weights

    int node_count() const { return static_cast<int>(times.size()); }
    int segment_of(int node) const;
};

// Subdivides each inter-impulse segment uniformly at (at most) the base grid
// spacing, always with at least 3 nodes per segment.
OrbitGrid make_orbit_grid(const GridSpec& spec, double horizon,
                          std::span<const double> impulse_times);

// Segment-wise finite differences: 3-point one-sided stencils at the ends of
// short segments, 4-point one-sided at the ends of longer ones, central in
// the interior. values/out hold `dim` components per node.
// Throws std::invalid_argument if any segment has fewer than 3 nodes.
void apply_derivative(const OrbitGrid& grid, std::span<const double> values, int dim,
                      std::span<double> out);

// out += D^T covec (adjoint of apply_derivative), same layout.
void apply_derivative_transpose(const OrbitGrid& grid, std::span<const double> covec,
                                int dim, std::span<double> out);

// Quadrature of a per-node scalar sample.
double quadrature(const OrbitGrid& grid, std::span<const double> nodal);

namespace detail {

// Calls f(row, col, coeff) for every entry of the derivative stencil matrix.
template <typename F>
void visit_derivative_stencil(const OrbitGrid& grid, F&& f) {
    for (const Segment& seg : grid.segments) {
        const int n = seg.size();
        if (n < 3) throw std::invalid_argument("derivative: segment with < 3 nodes");
        const double h = seg.spacing;
        const int b = seg.begin;
        const int last = seg.end - 1;
        if (n >= 4) {
            const double c = 1.0 / (6.0 * h);
            f(b, b, -11.0 * c);
            f(b, b + 1, 18.0 * c);
            f(b, b + 2, -9.0 * c);
            f(b, b + 3, 2.0 * c);
            f(last, last, 11.0 * c);
            f(last, last - 1, -18.0 * c);
            f(last, last - 2, 9.0 * c);
            f(last, last - 3, -2.0 * c);
        } else {
            const double c = 1.0 / (2.0 * h);
            f(b, b, -3.0 * c);
            f(b, b + 1, 4.0 * c);
            f(b, b + 2, -1.0 * c);
            f(last, last, 3.0 * c);
            f(last, last - 1, -4.0 * c);
            f(last, last - 2, 1.0 * c);
        }
        const double c2 = 1.0 / (2.0 * h);
        for (int i = b + 1; i < last; ++i) {
            f(i, i - 1, -c2);
            f(i, i + 1, c2);
        }
    }
}

}  // namespace detail

}  // namespace rimpact
