#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "conelab/field.hpp"

namespace conelab {

/**
 * Discrete Sturm-Liouville problem  -(1/m) (p u')' + V u  on a RadialGrid,
 * symmetric with respect to the m-weighted inner product.
 *
 * m is the volume density (e.g. psi^{n-1} or r^n), p the gradient-term
 * coefficient (4 m for the -4 Lap + R operator), V the potential.
 */
struct SturmLiouvilleProblem {
    ScalarField measure_density;  // m > 0 on the interior
    ScalarField stiffness_coeff;  // p > 0 on the interior
    ScalarField potential;        // V
    BoundaryKind left = BoundaryKind::pole_regular;
    BoundaryKind right = BoundaryKind::pole_regular;

    void validate() const {
        const auto& g = measure_density.grid();
        if (!g.same_grid(stiffness_coeff.grid()) || !g.same_grid(potential.grid()))
            throw error("grid_mismatch", "Sturm-Liouville coefficients on different grids");
        for (std::size_t i = 1; i + 1 < g.size(); ++i) {
            if (measure_density[i] <= 0.0)
                throw error("bad_measure", "measure density must be positive at interior nodes");
            if (stiffness_coeff[i] <= 0.0)
                throw error("bad_measure", "stiffness coefficient must be positive at interior nodes");
        }
    }
};

struct EigenResult {
    double eigenvalue = 0.0;
    ScalarField eigenfunction;  // positive, m-normalized
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

/// Solve tridiagonal system (dl, d, du) x = b; returns x.
inline std::vector<double> solve_tridiagonal(std::vector<double> dl, std::vector<double> d,
                                             std::vector<double> du, std::vector<double> b) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = dl[i] / d[i - 1];
        d[i] -= w * du[i - 1];
        b[i] -= w * b[i - 1];
    }
    b[n - 1] /= d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) b[i] = (b[i] - du[i] * b[i + 1]) / d[i];
    return b;
}

/**
 * Assembled quadratic form a(u,u) = sum p_half (du)^2/h + sum w m V u^2 and
 * mass b(u,u) = sum w m u^2 over the kept (non-eliminated) nodes.
 *
 * dirichlet_zero ends are pinned to 0 and excluded; pole_regular ends with
 * vanishing measure are identified with their neighbor (zero-flux stencil).
 */
struct AssembledForm {
    std::vector<double> diag, off, bmass;  // tridiagonal A and diagonal B
    std::size_t lo = 0, hi = 0;            // kept node range [lo, hi)
    bool merge_left = false, merge_right = false;
    std::size_t full_size = 0;

    std::size_t size() const { return hi - lo; }

    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        const std::size_t nk = size();
        for (std::size_t i = 0; i < nk; ++i) {
            double s = diag[i] * v[i];
            if (i > 0) s += off[i - 1] * v[i - 1];
            if (i + 1 < nk) s += off[i] * v[i + 1];
            out[i] = s;
        }
    }

    double energy(const std::vector<double>& v) const {
        const std::size_t nk = size();
        double s = 0.0;
        for (std::size_t i = 0; i < nk; ++i) {
            s += diag[i] * v[i] * v[i];
            if (i + 1 < nk) s += 2.0 * off[i] * v[i] * v[i + 1];
        }
        return s;
    }

    double mass(const std::vector<double>& v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += bmass[i] * v[i] * v[i];
        return s;
    }

    std::vector<double> restrict_field(const ScalarField& f) const {
        std::vector<double> v(size());
        for (std::size_t i = 0; i < size(); ++i) v[i] = f[lo + i];
        return v;
    }

    std::vector<double> expand(const std::vector<double>& v) const {
        std::vector<double> full(full_size, 0.0);
        for (std::size_t i = 0; i < size(); ++i) full[lo + i] = v[i];
        if (merge_left) full[0] = full[1];
        if (merge_right) full[full_size - 1] = full[full_size - 2];
        return full;
    }
};

inline AssembledForm assemble_form(const SturmLiouvilleProblem& problem) {
    problem.validate();
    const auto& grid = problem.measure_density.grid();
    const auto& x = grid.nodes();
    const auto& w = grid.weights();
    const auto& m = problem.measure_density.values();
    const auto& p = problem.stiffness_coeff.values();
    const auto& V = problem.potential.values();
    const std::size_t n = grid.size();

    const BoundaryKind bl = problem.left;
    const BoundaryKind br = problem.right;
    const bool drop_left = (bl == BoundaryKind::dirichlet_zero) ||
                           (bl == BoundaryKind::pole_regular && m.front() == 0.0);
    const bool drop_right = (br == BoundaryKind::dirichlet_zero) ||
                            (br == BoundaryKind::pole_regular && m.back() == 0.0);

    AssembledForm form;
    form.merge_left = drop_left && bl == BoundaryKind::pole_regular;
    form.merge_right = drop_right && br == BoundaryKind::pole_regular;
    form.full_size = n;
    form.lo = drop_left ? 1 : 0;
    form.hi = drop_right ? n - 1 : n;
    const std::size_t nk = form.hi - form.lo;
    if (nk < 3) throw error("bad_grid", "too few unknowns after boundary elimination");

    form.diag.assign(nk, 0.0);
    form.off.assign(nk, 0.0);
    form.bmass.assign(nk, 0.0);
    for (std::size_t i = form.lo; i < form.hi; ++i) {
        form.bmass[i - form.lo] = w[i] * m[i];
        form.diag[i - form.lo] = w[i] * m[i] * V[i];
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double ph = 0.5 * (p[i] + p[i + 1]) / (x[i + 1] - x[i]);
        const bool li = i >= form.lo && i < form.hi;
        const bool ri = i + 1 >= form.lo && i + 1 < form.hi;
        if (li && ri) {
            form.diag[i - form.lo] += ph;
            form.diag[i + 1 - form.lo] += ph;
            form.off[i - form.lo] -= ph;
        } else if (!li && ri && !form.merge_left) {
            form.diag[i + 1 - form.lo] += ph;  // Dirichlet end
        } else if (li && !ri && !form.merge_right) {
            form.diag[i - form.lo] += ph;
        }
        // merged pole ends contribute no flux: u_pole = u_neighbor
    }
    return form;
}

} // namespace detail

/**
 * Smallest eigenvalue of the discretized operator and its positive,
 * m-normalized eigenfunction. Inverse iteration with a guaranteed
 * under-shift, switching to Rayleigh-quotient shifts once close.
 */
inline EigenResult eigen_smallest(const SturmLiouvilleProblem& problem,
                                  int max_iterations = 500, double tolerance = 1e-10) {
    const detail::AssembledForm form = detail::assemble_form(problem);
    const std::size_t nk = form.size();
    const auto& V = problem.potential.values();

    double shift = *std::min_element(V.begin(), V.end()) - 1.0;
    std::vector<double> v(nk, 1.0), Av(nk), rhs(nk);
    {
        const double nb = std::sqrt(form.mass(v));
        for (auto& vi : v) vi /= nb;
    }
    double lambda = 0.0, residual = 0.0;
    int it = 0;
    bool rayleigh = false;
    bool done = false;
    for (; it < max_iterations && !done; ++it) {
        std::vector<double> dl(nk, 0.0), d(nk), du(nk, 0.0);
        for (std::size_t i = 0; i < nk; ++i) d[i] = form.diag[i] - shift * form.bmass[i];
        for (std::size_t i = 0; i + 1 < nk; ++i) {
            du[i] = form.off[i];
            dl[i + 1] = form.off[i];
        }
        for (std::size_t i = 0; i < nk; ++i) rhs[i] = form.bmass[i] * v[i];
        std::vector<double> z = detail::solve_tridiagonal(dl, d, du, rhs);
        const double nb = std::sqrt(form.mass(z));
        if (!(nb > 0.0) || !std::isfinite(nb)) break;
        for (std::size_t i = 0; i < nk; ++i) v[i] = z[i] / nb;

        form.apply(v, Av);
        double num = 0.0;
        for (std::size_t i = 0; i < nk; ++i) num += v[i] * Av[i];
        lambda = num;  // mass(v) = 1
        residual = 0.0;
        for (std::size_t i = 0; i < nk; ++i)
            residual = std::max(residual, std::abs(Av[i] - lambda * form.bmass[i] * v[i]));
        const double scale = std::abs(lambda) + 1.0;
        if (residual < tolerance * scale) done = true;
        if (!rayleigh && residual < 1e-5 * scale) rayleigh = true;
        if (rayleigh) shift = lambda - 1e-12 * scale;
    }
    if (!done && it >= max_iterations)
        throw error("eigen_no_convergence",
                    "residual " + std::to_string(residual) + " after max iterations");

    double mean = 0.0;
    for (std::size_t i = 0; i < nk; ++i) mean += form.bmass[i] * v[i];
    if (mean < 0.0)
        for (auto& vi : v) vi = -vi;

    ScalarField eig(problem.measure_density.grid_ptr(), form.expand(v));
    return EigenResult{lambda, std::move(eig), it, residual};
}

} // namespace conelab
