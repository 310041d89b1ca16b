#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "conelab/cone.hpp"
#include "conelab/field.hpp"
#include "conelab/link.hpp"

namespace conelab {

/// Uniform double in [0, 1) from the raw engine stream (stable across platforms,
/// unlike std::uniform_real_distribution).
inline double uniform01(std::mt19937& rng) { return double(rng() >> 5) * 0x1.0p-27; }

inline double uniform(std::mt19937& rng, double a, double b) {
    return a + (b - a) * uniform01(rng);
}

/// Nonnegative C1 bump made of 1-4 raised-cosine modes, not normalized.
inline ScalarField random_bump_field(std::shared_ptr<const RadialGrid> grid, std::mt19937& rng) {
    const int modes = 1 + int(rng() % 4);
    const double a = grid->nodes().front(), b = grid->nodes().back();
    std::vector<double> v(grid->size(), 0.0);
    for (int m = 0; m < modes; ++m) {
        const double center = uniform(rng, a + 0.1 * (b - a), b - 0.1 * (b - a));
        const double width = uniform(rng, 0.08, 0.35) * (b - a);
        const double amp = uniform(rng, 0.3, 1.0);
        for (std::size_t i = 0; i < grid->size(); ++i) {
            const double x = (grid->node(i) - center) / width;
            if (std::abs(x) < 1.0) v[i] += amp * 0.5 * (1.0 + std::cos(pi * x));
        }
    }
    for (auto& x : v) x += 1e-3;  // keep the field strictly positive
    return ScalarField(grid, std::move(v));
}

/// As above but vanishing at both grid ends (compact support inside).
inline ScalarField random_supported_bump(std::shared_ptr<const RadialGrid> grid,
                                         std::mt19937& rng) {
    ScalarField f = random_bump_field(grid, rng);
    std::vector<double> v = f.values();
    const double a = grid->nodes().front(), b = grid->nodes().back();
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double s = (grid->node(i) - a) / (b - a);
        const double ramp = s < 0.1 ? s / 0.1 : (s > 0.9 ? (1.0 - s) / 0.1 : 1.0);
        v[i] *= ramp * ramp * (3.0 - 2.0 * ramp);  // C1 cubic ramp
    }
    v.front() = 0.0;
    v.back() = 0.0;
    return ScalarField(grid, std::move(v), BoundaryKind::dirichlet_zero,
                       BoundaryKind::dirichlet_zero);
}

/**
 * Random closed warped profile near the round sphere: psi = sin(xi) * exp(eps q)
 * with q vanishing at the poles so the C1 pole closure is kept.
 */
inline ProfileWarped random_profile(int n, std::mt19937& rng, std::size_t nodes = 512,
                                    double eps = 0.05) {
    auto grid = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, pi, nodes));
    const int modes = 1 + int(rng() % 3);
    std::vector<double> q(nodes, 0.0);
    for (int m = 0; m < modes; ++m) {
        const int k = 1 + int(rng() % 4);
        const double amp = uniform(rng, -1.0, 1.0);
        for (std::size_t i = 0; i < nodes; ++i)
            q[i] += amp * std::sin(k * grid->node(i)) * std::sin(grid->node(i));
    }
    std::vector<double> psi(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
        psi[i] = std::sin(grid->node(i)) * std::exp(eps * q[i]);
    psi.front() = 0.0;
    psi.back() = 0.0;
    ScalarField f(grid, std::move(psi), BoundaryKind::pole_regular, BoundaryKind::pole_regular);
    return ProfileWarped{n, std::move(f), true};
}

/**
 * Admissible random field on a truncated cone: Gaussian envelope plus gentle
 * radial modes (in log r) and link modes with radially varying amplitude,
 * mass-normalized on the window.
 */
inline ConeField random_cone_field(const ConeOperator& cone, double tau, std::mt19937& rng) {
    ConeField f = cone.make_field();
    const auto& rg = *cone.geometry.radial_grid;
    const double t0 = std::log(rg.nodes().front()), t1 = std::log(rg.nodes().back());
    const double L = cone.link_op.grid->length();

    const int radial_modes = 1 + int(rng() % 2);
    const int link_modes = 1 + int(rng() % 2);
    std::vector<double> aw, af, ap;
    for (int k = 0; k < radial_modes; ++k) {
        aw.push_back(uniform(rng, 0.5, 2.0));     // frequency in t = log r
        af.push_back(uniform(rng, 0.0, 2.0 * pi));
        ap.push_back(uniform(rng, -0.4, 0.4));
    }
    std::vector<double> lk, lf, la, lc;
    for (int j = 0; j < link_modes; ++j) {
        lk.push_back(double(1 + int(rng() % 3)));  // cos(k pi xi / L): Neumann modes
        lf.push_back(uniform(rng, 0.4, 1.2));      // radial envelope frequency
        la.push_back(uniform(rng, -0.3, 0.3));
        lc.push_back(uniform(rng, t0 + 2.0, t1 - 2.0));
    }
    for (std::size_t ir = 0; ir < f.nr(); ++ir) {
        const double r = rg.node(ir);
        const double t = std::log(r);
        double radial = r * r / (4.0 * tau);
        for (int k = 0; k < radial_modes; ++k)
            radial += ap[k] * std::cos(aw[k] * (t - t0) + af[k]);
        for (std::size_t il = 0; il < f.nl(); ++il) {
            double v = radial;
            for (int j = 0; j < link_modes; ++j)
                v += la[j] * std::cos(lk[j] * pi * cone.link_op.grid->node(il) / L) *
                     std::cos(lf[j] * (t - lc[j]));
            f.at(ir, il) = v;
        }
    }
    normalize_cone_field(cone, f, tau);
    return f;
}

} // namespace conelab
