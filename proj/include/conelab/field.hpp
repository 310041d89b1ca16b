#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "conelab/constants.hpp"
#include "conelab/grid.hpp"

namespace conelab {

enum class BoundaryKind { dirichlet_zero, neumann_zero, pole_regular };

/**
 * Real function sampled on a shared RadialGrid, with boundary metadata.
 * Fields are value types; the grid is shared immutable state.
 */
class ScalarField {
public:
    ScalarField() = default;

    ScalarField(std::shared_ptr<const RadialGrid> grid, std::vector<double> values,
                BoundaryKind left = BoundaryKind::neumann_zero,
                BoundaryKind right = BoundaryKind::neumann_zero)
        : grid_(std::move(grid)), values_(std::move(values)), left_(left), right_(right) {
        if (!grid_ || values_.size() != grid_->size())
            throw error("grid_mismatch", "field values must match grid size");
        validate();
    }

    static ScalarField constant(std::shared_ptr<const RadialGrid> grid, double c) {
        std::vector<double> v(grid->size(), c);
        return ScalarField(std::move(grid), std::move(v));
    }

    const RadialGrid& grid() const { return *grid_; }
    std::shared_ptr<const RadialGrid> grid_ptr() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    BoundaryKind left_boundary() const noexcept { return left_; }
    BoundaryKind right_boundary() const noexcept { return right_; }

    void validate() const {
        for (double v : values_)
            if (!std::isfinite(v)) throw error("non_finite_field", "field has a non-finite sample");
        if (left_ == BoundaryKind::dirichlet_zero && values_.front() != 0.0)
            throw error("bad_boundary", "dirichlet_zero left endpoint must be 0");
        if (right_ == BoundaryKind::dirichlet_zero && values_.back() != 0.0)
            throw error("bad_boundary", "dirichlet_zero right endpoint must be 0");
    }

private:
    std::shared_ptr<const RadialGrid> grid_;
    std::vector<double> values_;
    BoundaryKind left_ = BoundaryKind::neumann_zero;
    BoundaryKind right_ = BoundaryKind::neumann_zero;
};

/// Quadrature of field * density over the grid. Both fields must share a grid.
inline double integrate(const ScalarField& field, const ScalarField& density) {
    if (!field.grid().same_grid(density.grid()))
        throw error("grid_mismatch", "integrate needs fields on one grid");
    const auto& w = field.grid().weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * field[i] * density[i];
    return s;
}

inline double integrate(const ScalarField& field) {
    const auto& w = field.grid().weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * field[i];
    return s;
}

namespace detail {

/// Central differences of samples y against abscissae x, one-sided at the ends.
/// order 2 everywhere, or order 4 in the interior when requested (uniform x only).
inline std::vector<double> differentiate_samples(const std::vector<double>& x,
                                                 const std::vector<double>& y,
                                                 int order = 2) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    auto uniform_h = [&]() -> double {
        const double h = x[1] - x[0];
        for (std::size_t i = 1; i + 1 < n; ++i)
            if (std::abs((x[i + 1] - x[i]) - h) > 1e-12 * std::abs(h)) return 0.0;
        return h;
    };
    const double h = uniform_h();
    if (order >= 4 && h > 0.0 && n >= 7) {
        for (std::size_t i = 2; i + 2 < n; ++i)
            d[i] = (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) / (12.0 * h);
        d[1] = (y[2] - y[0]) / (2.0 * h);
        d[n - 2] = (y[n - 1] - y[n - 3]) / (2.0 * h);
        d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
        d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = x[i] - x[i - 1], hr = x[i + 1] - x[i];
        d[i] = (y[i + 1] * hl * hl - y[i - 1] * hr * hr + y[i] * (hr * hr - hl * hl)) /
               (hl * hr * (hl + hr));
    }
    {
        const double h0 = x[1] - x[0], h1 = x[2] - x[1];
        d[0] = (-(2.0 * h0 + h1) / (h0 * (h0 + h1))) * y[0] +
               ((h0 + h1) / (h0 * h1)) * y[1] - (h0 / (h1 * (h0 + h1))) * y[2];
        const double g1 = x[n - 1] - x[n - 2], g0 = x[n - 2] - x[n - 3];
        d[n - 1] = ((2.0 * g1 + g0) / (g1 * (g0 + g1))) * y[n - 1] -
                   ((g0 + g1) / (g0 * g1)) * y[n - 2] + (g1 / (g0 * (g0 + g1))) * y[n - 3];
    }
    return d;
}

} // namespace detail

/**
 * d/dr of a field. On logarithmic grids the derivative is taken in t = log r
 * (uniform there, so the 4th-order stencil applies) and mapped back by 1/r.
 */
inline ScalarField differentiate(const ScalarField& f, int order = 2) {
    const auto& g = f.grid();
    std::vector<double> d;
    if (g.spacing_kind() == SpacingKind::logarithmic) {
        std::vector<double> t(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) t[i] = std::log(g.node(i));
        d = detail::differentiate_samples(t, f.values(), order);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] /= g.node(i);
    } else {
        d = detail::differentiate_samples(g.nodes(), f.values(), order);
    }
    return ScalarField(f.grid_ptr(), std::move(d));
}

/// Second derivative via two first-derivative passes (keeps log-grid handling).
inline ScalarField differentiate_twice(const ScalarField& f, int order = 2) {
    return differentiate(differentiate(f, order), order);
}

} // namespace conelab
