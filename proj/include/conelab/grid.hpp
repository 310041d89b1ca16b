#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "conelab/constants.hpp"

namespace conelab {

enum class SpacingKind { uniform, logarithmic };

/**
 * 1D quadrature grid. Nodes are strictly increasing; weights integrate
 * functions sampled at the nodes over [nodes.front(), nodes.back()].
 *
 * Uniform grids carry composite Simpson weights (O(h^4) on smooth data,
 * with a 3/8 block when the interval count is odd). Logarithmic grids
 * carry per-cell trapezoid weights, which integrate constants exactly on
 * any node layout.
 */
class RadialGrid {
public:
    static RadialGrid uniform(double a, double b, std::size_t n) {
        check_extent(a, b, n);
        RadialGrid g;
        g.kind_ = SpacingKind::uniform;
        g.nodes_.resize(n);
        const double h = (b - a) / double(n - 1);
        for (std::size_t i = 0; i < n; ++i) g.nodes_[i] = a + h * double(i);
        g.nodes_.back() = b;
        g.weights_ = simpson_weights(n, h);
        return g;
    }

    /// Log-spaced nodes; requires a > 0.
    static RadialGrid logarithmic(double a, double b, std::size_t n) {
        check_extent(a, b, n);
        if (a <= 0.0) throw error("bad_grid", "logarithmic grid needs a > 0");
        RadialGrid g;
        g.kind_ = SpacingKind::logarithmic;
        g.nodes_.resize(n);
        const double la = std::log(a), lb = std::log(b);
        const double dt = (lb - la) / double(n - 1);
        for (std::size_t i = 0; i < n; ++i) g.nodes_[i] = std::exp(la + dt * double(i));
        g.nodes_.front() = a;
        g.nodes_.back() = b;
        g.weights_ = trapezoid_weights(g.nodes_);
        return g;
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    SpacingKind spacing_kind() const noexcept { return kind_; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double node(std::size_t i) const { return nodes_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }
    double length() const { return nodes_.back() - nodes_.front(); }

    /// Node spacing to the right of node i (last entry repeats).
    double spacing(std::size_t i) const {
        const std::size_t j = (i + 1 < nodes_.size()) ? i + 1 : i;
        return j == i ? nodes_[i] - nodes_[i - 1] : nodes_[j] - nodes_[i];
    }

    bool same_grid(const RadialGrid& other) const noexcept {
        return this == &other ||
               (kind_ == other.kind_ && nodes_ == other.nodes_);
    }

private:
    static void check_extent(double a, double b, std::size_t n) {
        if (n < 16) throw error("bad_grid", "grids need at least 16 nodes");
        if (!(a < b)) throw error("bad_grid", "grid extent must satisfy a < b");
    }

    static std::vector<double> trapezoid_weights(const std::vector<double>& x) {
        const std::size_t n = x.size();
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = x[i + 1] - x[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        return w;
    }

    static std::vector<double> simpson_weights(std::size_t n, double h) {
        std::vector<double> w(n, 0.0);
        std::size_t i = 0;
        std::size_t intervals = n - 1;
        if (intervals % 2 == 1) {
            if (intervals >= 3) {
                // leading 3/8 block keeps the remainder even
                w[0] += 3.0 * h / 8.0;
                w[1] += 9.0 * h / 8.0;
                w[2] += 9.0 * h / 8.0;
                w[3] += 3.0 * h / 8.0;
                i = 3;
                intervals -= 3;
            } else {
                w[0] += 0.5 * h;
                w[1] += 0.5 * h;
                return w;
            }
        }
        for (; i + 2 < n; i += 2) {
            w[i] += h / 3.0;
            w[i + 1] += 4.0 * h / 3.0;
            w[i + 2] += h / 3.0;
        }
        return w;
    }

    SpacingKind kind_ = SpacingKind::uniform;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

} // namespace conelab
