#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "conelab/sturm_liouville.hpp"

namespace conelab {

/**
 * Descriptor of a functional of the entropy family,
 *
 *   J(u) = tau * a(u,u) - entropy_weight * Int u^2 log(u^2) m  + offset,
 *
 * minimized over u with Int u^2 m = 1. The quadratic form a carries the
 * gradient coefficient and potential (for W/F these are p = 4m and V = R),
 * so the F case (include_entropy = false, tau = 1, offset = 0) is exactly
 * the Rayleigh quotient of the eigenproblem.
 */
struct FunctionalDescriptor {
    SturmLiouvilleProblem quadratic;
    double tau = 1.0;
    bool include_entropy = true;
    double entropy_weight = 1.0;
    double offset = 0.0;  // e.g. -(d/2) log(4 pi tau) - d
};

enum class MinimizeStatus { converged, unbounded_below, iteration_limit };

struct MinimizeResult {
    MinimizeStatus status = MinimizeStatus::converged;
    double minimum = 0.0;
    ScalarField minimizer;
    double grad_residual = 0.0;
    int steps = 0;
    std::vector<double> trace;  // objective values along the descent
};

struct MinimizeOptions {
    int max_steps = 5000;
    int stable_steps = 20;          // consecutive small-change steps to stop
    double floor = -1e6;            // objective below this => unbounded_below
    int runaway_steps = 50;         // steps with drop > runaway_drop each
    double runaway_drop = 1.0;
    double initial_step = 0.1;
};

/**
 * Norm-constrained descent with renormalization after each step: damped
 * Newton steps (the Hessian is tridiagonal plus a diagonal entropy term,
 * so each solve is O(N)), falling back to backtracking projected gradient
 * when a Newton step is rejected.
 *
 * The returned value is an upper bound on the infimum over the discretized
 * invariant class. "unbounded_below" is a meaningful outcome (the entropy
 * family can genuinely have no minimum), not a failure.
 */
inline MinimizeResult minimize_normalized(const FunctionalDescriptor& objective,
                                          const ScalarField& init, double tolerance,
                                          const MinimizeOptions& options = {}) {
    const detail::AssembledForm form = detail::assemble_form(objective.quadratic);
    const std::size_t nk = form.size();
    const double ew = objective.include_entropy ? objective.entropy_weight : 0.0;

    std::vector<double> u = form.restrict_field(init);
    {
        const double mass = form.mass(u);
        if (std::abs(mass - 1.0) > 1e-8)
            throw error("not_normalized",
                        "init mass " + std::to_string(mass) + " is not 1 within 1e-8");
        const double s = 1.0 / std::sqrt(mass);
        for (auto& ui : u) ui *= s;
    }

    auto value = [&](const std::vector<double>& v) {
        double J = objective.tau * form.energy(v);
        if (ew != 0.0) {
            double ent = 0.0;
            for (std::size_t i = 0; i < nk; ++i) ent += form.bmass[i] * xlogx(v[i] * v[i]);
            J -= ew * ent;
        }
        return J + objective.offset;
    };
    std::vector<double> Au(nk), grad(nk);
    auto fill_gradient = [&](const std::vector<double>& v) {
        form.apply(v, Au);
        for (std::size_t i = 0; i < nk; ++i) {
            double g = 2.0 * objective.tau * Au[i];
            const double vv = v[i] * v[i];
            if (ew != 0.0 && vv > 0.0)
                g -= 2.0 * ew * form.bmass[i] * v[i] * (std::log(vv) + 1.0);
            grad[i] = g;
        }
    };
    auto project = [&](const std::vector<double>& v, std::vector<double>& g) {
        double gn = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < nk; ++i) {
            const double ni = form.bmass[i] * v[i];
            gn += g[i] * ni;
            nn += ni * ni;
        }
        const double mu = nn > 0.0 ? gn / nn : 0.0;
        double gmax = 0.0;
        for (std::size_t i = 0; i < nk; ++i) {
            g[i] -= mu * form.bmass[i] * v[i];
            gmax = std::max(gmax, std::abs(g[i]));
        }
        return gmax;
    };

    MinimizeResult result;
    result.trace.reserve(256);
    double J = value(u);
    result.trace.push_back(J);

    double step = options.initial_step;
    double damping = 1e-3;
    int stable = 0, runaway = 0;
    std::vector<double> trial(nk), hl(nk), hd(nk), hu(nk), dir(nk);
    int it = 0;
    for (; it < options.max_steps; ++it) {
        fill_gradient(u);
        const double gmax = project(u, grad);
        result.grad_residual = gmax;
        double gsq = 0.0;
        for (std::size_t i = 0; i < nk; ++i) gsq += grad[i] * grad[i];
        if (gsq == 0.0) break;

        double Jnew = J;
        bool accepted = false;

        // damped Newton: (2 tau A + diag(entropy'') + sigma B) d = -grad
        for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
            for (std::size_t i = 0; i < nk; ++i) {
                double h = 2.0 * objective.tau * form.diag[i] + damping * form.bmass[i];
                const double vv = u[i] * u[i];
                if (ew != 0.0)
                    h -= 2.0 * ew * form.bmass[i] * (std::log(std::max(vv, 1e-300)) + 3.0);
                hd[i] = h;
            }
            for (std::size_t i = 0; i + 1 < nk; ++i) {
                hu[i] = 2.0 * objective.tau * form.off[i];
                hl[i + 1] = 2.0 * objective.tau * form.off[i];
            }
            hl[0] = 0.0;
            hu[nk - 1] = 0.0;
            bool spd = true;
            for (std::size_t i = 0; i < nk; ++i)
                if (!(hd[i] > 0.0)) spd = false;
            if (spd) {
                std::vector<double> rhs(nk);
                for (std::size_t i = 0; i < nk; ++i) rhs[i] = -grad[i];
                dir = detail::solve_tridiagonal(hl, hd, hu, rhs);
                for (std::size_t i = 0; i < nk; ++i) trial[i] = u[i] + dir[i];
                const double mass = form.mass(trial);
                if (mass > 0.0 && std::isfinite(mass)) {
                    const double s = 1.0 / std::sqrt(mass);
                    for (auto& ti : trial) ti *= s;
                    const double Jt = value(trial);
                    if (std::isfinite(Jt) && Jt < J) {
                        Jnew = Jt;
                        accepted = true;
                        damping = std::max(damping * 0.25, 1e-12);
                        break;
                    }
                }
            }
            damping = std::max(damping, 1e-6) * 16.0;
        }

        if (!accepted) {  // projected-gradient fallback with backtracking
            for (int bt = 0; bt < 40; ++bt) {
                for (std::size_t i = 0; i < nk; ++i) trial[i] = u[i] - step * grad[i];
                const double mass = form.mass(trial);
                if (mass > 0.0 && std::isfinite(mass)) {
                    const double s = 1.0 / std::sqrt(mass);
                    for (auto& ti : trial) ti *= s;
                    const double Jt = value(trial);
                    if (std::isfinite(Jt) && Jt < J - 1e-4 * step * gsq) {
                        Jnew = Jt;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (accepted) step *= 1.9;
        }
        if (!accepted) break;  // stationary to line-search resolution

        std::swap(u, trial);
        const double drop = J - Jnew;
        J = Jnew;
        result.trace.push_back(J);

        if (J < options.floor) {
            result.status = MinimizeStatus::unbounded_below;
            break;
        }
        runaway = drop > options.runaway_drop ? runaway + 1 : 0;
        if (runaway >= options.runaway_steps) {
            result.status = MinimizeStatus::unbounded_below;
            break;
        }
        const double rel = std::abs(drop) / (std::abs(J) + 1.0);
        stable = rel < tolerance ? stable + 1 : 0;
        if (stable >= options.stable_steps) break;
    }
    if (it >= options.max_steps) result.status = MinimizeStatus::iteration_limit;

    result.steps = it;
    result.minimum = J;

    // positive sign convention, matching the eigenfunction one
    double mean = 0.0;
    for (std::size_t i = 0; i < nk; ++i) mean += form.bmass[i] * u[i];
    if (mean < 0.0)
        for (auto& ui : u) ui = -ui;
    result.minimizer = ScalarField(init.grid_ptr(), form.expand(u), init.left_boundary(),
                                   init.right_boundary());
    return result;
}

} // namespace conelab
