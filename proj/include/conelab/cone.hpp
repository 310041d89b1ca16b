#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "conelab/link.hpp"

namespace conelab {

/// Cone dr^2 + r^2 g^N over a rotationally symmetric link, truncated to
/// [r_min, r_max] with a logarithmic radial grid.
struct ConeGeometry {
    LinkGeometry link;
    double r_min = 1e-4;
    double r_max = 1e2;
    std::shared_ptr<const RadialGrid> radial_grid;

    ConeGeometry(LinkGeometry l, double rmin, double rmax, std::size_t nodes = 2048)
        : link(std::move(l)), r_min(rmin), r_max(rmax) {
        if (!(0.0 < r_min && r_min < r_max))
            throw error("bad_cone", "need 0 < r_min < r_max");
        radial_grid =
            std::make_shared<RadialGrid>(RadialGrid::logarithmic(r_min, r_max, nodes));
    }
};

/// Default truncation window [1e-4, 1e2] * sqrt(tau) (integrands scale in r/sqrt(tau)).
inline ConeGeometry make_cone(LinkGeometry link, double tau, std::size_t nodes = 2048) {
    const double s = std::sqrt(tau);
    return ConeGeometry(std::move(link), 1e-4 * s, 1e2 * s, nodes);
}

/**
 * Function on the truncated cone, sampled on radial x link-angle nodes
 * (row-major, value(ir, il) = values[ir * nl + il]). Link direction uses the
 * link profile grid of the cone's LinkOperator.
 */
struct ConeField {
    std::shared_ptr<const RadialGrid> radial;
    std::shared_ptr<const RadialGrid> link_grid;
    std::vector<double> values;

    double& at(std::size_t ir, std::size_t il) { return values[ir * link_grid->size() + il]; }
    double at(std::size_t ir, std::size_t il) const {
        return values[ir * link_grid->size() + il];
    }
    std::size_t nr() const { return radial->size(); }
    std::size_t nl() const { return link_grid->size(); }
};

/// Cone data bundle: the link operator plus the radial grid and dimensions.
struct ConeOperator {
    ConeGeometry geometry;
    LinkOperator link_op;
    int n;  // link dimension; the cone is (n+1)-dimensional

    explicit ConeOperator(const ConeGeometry& g, std::size_t link_nodes = 512)
        : geometry(g), link_op(link_operator(g.link, link_nodes)), n(g.link.dim()) {}

    ConeField make_field() const {
        ConeField f;
        f.radial = geometry.radial_grid;
        f.link_grid = link_op.grid;
        f.values.assign(f.nr() * f.nl(), 0.0);
        return f;
    }
};

/// Scalar curvature (R^N(xi) - n(n-1)) / r^2 of the cone.
inline ConeField cone_scalar_curvature(const ConeOperator& cone) {
    ConeField R = cone.make_field();
    const int n = cone.n;
    for (std::size_t ir = 0; ir < R.nr(); ++ir) {
        const double r2 = cone.geometry.radial_grid->node(ir);
        for (std::size_t il = 0; il < R.nl(); ++il)
            R.at(ir, il) = (cone.link_op.R[il] - n * (n - 1)) / (r2 * r2);
    }
    return R;
}

namespace detail {

/// d/dr along each radial column (4th order in log r).
inline ConeField radial_derivative(const ConeOperator& cone, const ConeField& f) {
    ConeField d = f;
    const std::size_t nr = f.nr(), nl = f.nl();
    std::vector<double> t(nr), col(nr);
    for (std::size_t ir = 0; ir < nr; ++ir) t[ir] = std::log(f.radial->node(ir));
    for (std::size_t il = 0; il < nl; ++il) {
        for (std::size_t ir = 0; ir < nr; ++ir) col[ir] = f.at(ir, il);
        std::vector<double> dc = differentiate_samples(t, col, 4);
        for (std::size_t ir = 0; ir < nr; ++ir) d.at(ir, il) = dc[ir] / f.radial->node(ir);
    }
    return d;
}

/// d/dxi along each link row (4th order on the uniform link grid).
inline ConeField link_derivative(const ConeField& f) {
    ConeField d = f;
    const std::size_t nr = f.nr(), nl = f.nl();
    std::vector<double> row(nl);
    for (std::size_t ir = 0; ir < nr; ++ir) {
        for (std::size_t il = 0; il < nl; ++il) row[il] = f.at(ir, il);
        std::vector<double> dr = differentiate_samples(f.link_grid->nodes(), row, 4);
        for (std::size_t il = 0; il < nl; ++il) d.at(ir, il) = dr[il];
    }
    return d;
}

} // namespace detail

/// Int over the cone of e^{-f} / (4 pi tau)^{(n+1)/2} dv on the window.
inline double cone_field_mass(const ConeOperator& cone, const ConeField& f, double tau) {
    const auto& wr = cone.geometry.radial_grid->weights();
    const auto& wl = cone.link_op.grid->weights();
    const int n = cone.n;
    const double norm = std::pow(4.0 * pi * tau, -0.5 * (n + 1));
    double mass = 0.0;
    for (std::size_t ir = 0; ir < f.nr(); ++ir) {
        const double r = cone.geometry.radial_grid->node(ir);
        const double rn = std::pow(r, n);
        double link_int = 0.0;
        for (std::size_t il = 0; il < f.nl(); ++il)
            link_int += wl[il] * cone.link_op.m[il] * std::exp(-f.at(ir, il));
        mass += wr[ir] * rn * link_int;
    }
    return norm * mass;
}

/// Additively shift f so the cone mass is exactly 1 on the window.
inline void normalize_cone_field(const ConeOperator& cone, ConeField& f, double tau) {
    const double mass = cone_field_mass(cone, f, tau);
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw error("mass_underflow", "cone field has vanishing or non-finite mass");
    const double c = std::log(mass);
    for (auto& v : f.values) v += c;
}

/**
 * The entropy of the truncated cone evaluated directly:
 * Int [ tau ((d_r f)^2 + (|grad_N f|^2 + R^N - n(n-1)) / r^2) + f - (n+1) ] u^2 dv
 * with u^2 = e^{-f} / (4 pi tau)^{(n+1)/2}.
 */
inline double w_cone_basic(const ConeOperator& cone, const ConeField& f, double tau) {
    const double mass = cone_field_mass(cone, f, tau);
    if (std::abs(mass - 1.0) > 1e-6)
        throw error("not_normalized",
                    "cone mass " + std::to_string(mass) + " is not 1 within 1e-6");
    const ConeField fr = detail::radial_derivative(cone, f);
    const ConeField fx = detail::link_derivative(f);
    const auto& wr = cone.geometry.radial_grid->weights();
    const auto& wl = cone.link_op.grid->weights();
    const int n = cone.n;
    const double norm = std::pow(4.0 * pi * tau, -0.5 * (n + 1));
    double total = 0.0;
    for (std::size_t ir = 0; ir < f.nr(); ++ir) {
        const double r = cone.geometry.radial_grid->node(ir);
        const double rn = std::pow(r, n);
        double link_int = 0.0;
        for (std::size_t il = 0; il < f.nl(); ++il) {
            const double fv = f.at(ir, il);
            const double integrand =
                tau * (fr.at(ir, il) * fr.at(ir, il) +
                       (fx.at(ir, il) * fx.at(ir, il) + cone.link_op.R[il] - n * (n - 1)) /
                           (r * r)) +
                fv - (n + 1);
            link_int += wl[il] * cone.link_op.m[il] * integrand * std::exp(-fv);
        }
        total += wr[ir] * rn * link_int;
    }
    return norm * total;
}

/// Separation f = f_tilde + a_r with the per-radius and radial normalizations.
struct SeparatedPotential {
    ConeField f_tilde;
    ScalarField a_r;
    double tau = 1.0;
};

inline SeparatedPotential separate_variables(const ConeOperator& cone, const ConeField& f,
                                             double tau) {
    const auto& wl = cone.link_op.grid->weights();
    const int n = cone.n;
    SeparatedPotential sep;
    sep.tau = tau;
    sep.f_tilde = f;
    std::vector<double> a(f.nr());
    for (std::size_t ir = 0; ir < f.nr(); ++ir) {
        const double r = cone.geometry.radial_grid->node(ir);
        // log Int e^{-f} m dxi with a min-shift, stable at any depth
        double fmin = f.at(ir, 0);
        for (std::size_t il = 1; il < f.nl(); ++il) fmin = std::min(fmin, f.at(ir, il));
        double M = 0.0;
        for (std::size_t il = 0; il < f.nl(); ++il)
            M += wl[il] * cone.link_op.m[il] * std::exp(fmin - f.at(ir, il));
        if (!(M > 0.0) || !std::isfinite(M) || !std::isfinite(fmin))
            throw error("mass_underflow",
                        "e^{-f} mass underflow at radius " + std::to_string(r));
        // Int_N (4 pi tau r^{-2})^{-n/2} e^{-f_tilde} dv = 1 at every radius
        a[ir] = -(n * std::log(r) - 0.5 * n * std::log(4.0 * pi * tau) - fmin + std::log(M));
        for (std::size_t il = 0; il < f.nl(); ++il) sep.f_tilde.at(ir, il) -= a[ir];
    }
    sep.a_r = ScalarField(cone.geometry.radial_grid, std::move(a));
    return sep;
}

/**
 * Entropy via the separated expression: the link-entropy term
 * Int [ W^N(f_tilde, tau/r^2) - n(n-1) tau/r^2 ] e^{-a_r}/(4 pi tau)^{1/2} dr
 * plus the radial term with the full d_r f derivative. Agrees with
 * w_cone_basic by nodewise algebra.
 */
struct SeparatedValue {
    double link_term = 0.0;    // Int [W^N - n(n-1) tau/r^2] mu_a dr
    double radial_term = 0.0;  // Int Int [tau (d_r f)^2 + a_r - 1] mu_a u_r^2
    double total = 0.0;
};

inline SeparatedValue w_from_separated_parts(const ConeOperator& cone,
                                             const SeparatedPotential& sep) {
    const double tau = sep.tau;
    const auto& wr = cone.geometry.radial_grid->weights();
    const auto& wl = cone.link_op.grid->weights();
    const int n = cone.n;

    // full f derivative (f = f_tilde + a_r nodewise)
    ConeField f = sep.f_tilde;
    for (std::size_t ir = 0; ir < f.nr(); ++ir)
        for (std::size_t il = 0; il < f.nl(); ++il) f.at(ir, il) += sep.a_r[ir];
    const ConeField fr = detail::radial_derivative(cone, f);
    const ConeField fx = detail::link_derivative(sep.f_tilde);

    const double mu_norm = std::pow(4.0 * pi * tau, -0.5);
    double term1 = 0.0, term2 = 0.0;
    for (std::size_t ir = 0; ir < f.nr(); ++ir) {
        const double r = cone.geometry.radial_grid->node(ir);
        const double tau_r = tau / (r * r);
        const double un = std::pow(4.0 * pi * tau_r, -0.5 * n);
        double wN = 0.0, radial = 0.0;
        for (std::size_t il = 0; il < f.nl(); ++il) {
            const double ft = sep.f_tilde.at(ir, il);
            const double u2 = un * std::exp(-ft);
            wN += wl[il] * cone.link_op.m[il] * u2 *
                  (tau_r * (fx.at(ir, il) * fx.at(ir, il) + cone.link_op.R[il]) + ft - n);
            radial += wl[il] * cone.link_op.m[il] * u2 * tau * fr.at(ir, il) * fr.at(ir, il);
        }
        const double mu_a = mu_norm * std::exp(-sep.a_r[ir]);
        term1 += wr[ir] * mu_a * (wN - n * (n - 1) * tau_r);
        term2 += wr[ir] * mu_a * (radial + sep.a_r[ir] - 1.0);
    }
    return SeparatedValue{term1, term2, term1 + term2};
}

inline double w_from_separated(const ConeOperator& cone, const SeparatedPotential& sep) {
    return w_from_separated_parts(cone, sep).total;
}

/// Max over interior radii of | Int u_r^2 d_r f_tilde dv - n/r |.
inline double radial_identity_residual(const ConeOperator& cone,
                                       const SeparatedPotential& sep) {
    const ConeField ftr = detail::radial_derivative(cone, sep.f_tilde);
    const auto& wl = cone.link_op.grid->weights();
    const int n = cone.n;
    double worst = 0.0;
    for (std::size_t ir = 4; ir + 4 < sep.f_tilde.nr(); ++ir) {
        const double r = cone.geometry.radial_grid->node(ir);
        const double un = std::pow(4.0 * pi * sep.tau / (r * r), -0.5 * n);
        double I = 0.0;
        for (std::size_t il = 0; il < sep.f_tilde.nl(); ++il)
            I += wl[il] * cone.link_op.m[il] * un * std::exp(-sep.f_tilde.at(ir, il)) *
                 ftr.at(ir, il);
        worst = std::max(worst, std::abs(I - n / r));
    }
    return worst;
}

/// Jensen-reduced radial functional (lower bound for the separated radial term).
inline double reduced_radial_term(const ConeOperator& cone, const SeparatedPotential& sep) {
    const double tau = sep.tau;
    std::vector<double> shifted(sep.a_r.values());
    const auto& nodes = cone.geometry.radial_grid->nodes();
    for (std::size_t ir = 0; ir < shifted.size(); ++ir)
        shifted[ir] += cone.n * std::log(nodes[ir]);
    const ScalarField s(cone.geometry.radial_grid, std::move(shifted));
    const ScalarField ds = differentiate(s, 4);
    const auto& wr = cone.geometry.radial_grid->weights();
    const double mu_norm = std::pow(4.0 * pi * tau, -0.5);
    double total = 0.0;
    for (std::size_t ir = 0; ir < nodes.size(); ++ir) {
        const double mu_a = mu_norm * std::exp(-sep.a_r[ir]);
        total += wr[ir] * mu_a * (tau * ds[ir] * ds[ir] + sep.a_r[ir] - 1.0);
    }
    return total;
}

/// Gaussian potential |x|^2 / (4 tau) centered at the tip, mass-normalized
/// on the window.
inline ConeField gaussian_cone_field(const ConeOperator& cone, double tau) {
    ConeField f = cone.make_field();
    for (std::size_t ir = 0; ir < f.nr(); ++ir) {
        const double r = cone.geometry.radial_grid->node(ir);
        for (std::size_t il = 0; il < f.nl(); ++il) f.at(ir, il) = r * r / (4.0 * tau);
    }
    normalize_cone_field(cone, f, tau);
    return f;
}

// ---------------------------------------------------------------------------
// Divergence probe (the b r^{-a} ground-state family)
// ---------------------------------------------------------------------------

struct ProbeFamily {
    double a_exponent = 0.0;
    double b_norm = 1.0;          // recomputed per truncation
    double r0 = 1.0;
    double inner_cutoff_eps = 1e-5;
    ScalarField link_ground_state;  // m-normalized ground state of -4 Lap + R
    double K = 0.0;                 // lambda^N - n(n-1)
    double S = 0.0;                 // Int u~^2 log u~^2 dv
};

/// Probe with exponent strictly inside cond1/cond2 when possible, else the
/// cond2 midpoint; fraction sets the position inside the admissible gap.
inline ProbeFamily make_probe(const LinkGeometry& link, double r0 = 1.0,
                              double fraction = 0.7, std::size_t nodes = 512) {
    const int n = link.dim();
    const LinkOperator op = link_operator(link, nodes);
    const EigenResult ground = eigen_smallest(SturmLiouvilleProblem{op.m, op.p, op.R});
    ProbeFamily p;
    p.r0 = r0;
    p.link_ground_state = ground.eigenfunction;
    p.K = ground.eigenvalue - n * (n - 1);
    const auto& w = op.grid->weights();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double u2 = ground.eigenfunction[i] * ground.eigenfunction[i];
        p.S += w[i] * op.m[i] * xlogx(u2);
    }
    const double lo = 0.5 * (n - 1);
    const double hi_cond2 = 0.5 * (n + 1);
    const double hi_cond1 = p.K < 0.0 ? 0.5 * std::sqrt(-p.K) : lo;
    const double hi = std::min(hi_cond2, std::max(hi_cond1, lo));
    p.a_exponent = hi > lo ? lo + fraction * (hi - lo) : lo + 0.25 * (hi_cond2 - lo);
    return p;
}

struct ProbeTrace {
    std::vector<double> eps;
    std::vector<double> w_values;
    double fitted_exponent = 0.0;    // of the trace divergence W ~ C eps^p
    double expected_exponent = 0.0;  // n - 2a - 1 for the power family
    bool unbounded = false;
    bool monotone_decreasing = false;
};

/**
 * W of v = (b / r^a) u~ chi_[0, 2 r0] on [eps, 2 r0] truncations, b
 * renormalized per truncation to unit L2 mass. The trace decreases without
 * bound exactly when cond1 holds strictly; on the finite side the quadratic
 * coefficient 4a^2 + K is positive and the trace stays bounded below.
 */
inline ProbeTrace divergence_probe(const ConeOperator& cone, const ProbeFamily& probe,
                                   const std::vector<double>& eps_sequence, double tau = 1.0,
                                   std::size_t quad_nodes = 8192) {
    const int n = cone.n;
    const double a = probe.a_exponent;
    if (a < 0.5 * (n - 1) - 1e-12 || a >= 0.5 * (n + 1))
        throw error("probe_out_of_window", "need (n-1)/2 <= a < (n+1)/2");
    const double r0 = probe.r0;

    ProbeTrace trace;
    trace.expected_exponent = n - 2.0 * a - 1.0;
    for (double eps : eps_sequence) {
        if (!(eps > 0.0 && eps < r0))
            throw error("bad_query", "eps must lie in (0, r0)");
        const RadialGrid g = RadialGrid::logarithmic(eps, 2.0 * r0, quad_nodes);
        const auto& w = g.weights();
        double mass = 0.0, quad = 0.0, nash_log = 0.0, nash_rn = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r = g.node(i);
            double chi = 1.0, dchi = 0.0;
            if (r > r0) {
                const double s = (r - r0) / r0;
                chi = 1.0 - s * s * (3.0 - 2.0 * s);
                dchi = -6.0 * s * (1.0 - s) / r0;
            }
            const double ra = std::pow(r, -a);
            const double rho = ra * chi;
            const double drho = -a * ra / r * chi + ra * dchi;
            const double rn = std::pow(r, n);
            mass += w[i] * rn * rho * rho;
            quad += w[i] * rn * tau * (4.0 * drho * drho + probe.K * rho * rho / (r * r));
            nash_log += w[i] * rn * xlogx(rho * rho);
            nash_rn += w[i] * rn * rho * rho;
        }
        const double b2 = 1.0 / mass;
        // W = b^2 quad - b^2 [nash_log + (log b^2 + S) nash_rn] - const(n, tau)
        const double W = b2 * quad - b2 * (nash_log + (std::log(b2) + probe.S) * nash_rn) -
                         0.5 * (n + 1) * std::log(4.0 * pi * tau) - (n + 1);
        trace.eps.push_back(eps);
        trace.w_values.push_back(W);
    }

    trace.monotone_decreasing = true;
    for (std::size_t i = 1; i < trace.w_values.size(); ++i)
        if (trace.w_values[i] >= trace.w_values[i - 1]) trace.monotone_decreasing = false;

    // fit p from ratios of successive increments (exact for C0 + C1 eps^p
    // on a geometric eps ladder)
    if (trace.w_values.size() >= 3) {
        double num = 0.0, cnt = 0.0;
        const std::size_t first = trace.w_values.size() >= 4 ? 3 : 2;
        for (std::size_t i = first; i < trace.w_values.size(); ++i) {
            const double d1 = trace.w_values[i - 1] - trace.w_values[i - 2];
            const double d2 = trace.w_values[i] - trace.w_values[i - 1];
            const double ratio_eps = trace.eps[i] / trace.eps[i - 1];
            if (d1 * d2 > 0.0 && std::abs(ratio_eps - trace.eps[i - 1] / trace.eps[i - 2]) <
                                     1e-9 * ratio_eps) {
                num += std::log(d2 / d1) / std::log(ratio_eps);
                cnt += 1.0;
            }
        }
        trace.fitted_exponent = cnt > 0.0 ? num / cnt : 0.0;
    }
    const double total_drop = trace.w_values.front() - trace.w_values.back();
    trace.unbounded = trace.monotone_decreasing && total_drop > 1.0 &&
                      trace.fitted_exponent < 1e-3;
    return trace;
}

/// Geometric eps ladder {start, start/10, ...} with `decades` + 1 entries.
inline std::vector<double> eps_decades(double start, int decades) {
    std::vector<double> e;
    for (int i = 0; i <= decades; ++i) e.push_back(start * std::pow(10.0, -i));
    return e;
}

// ---------------------------------------------------------------------------
// Finiteness dichotomy and the explicit bounds
// ---------------------------------------------------------------------------

enum class MuVerdict { mu_infinite, mu_finite, undetermined };
enum class LambdaConeVerdict { zero, minus_infinity, undetermined };

struct ConeClassification {
    MuVerdict mu = MuVerdict::undetermined;
    LambdaConeVerdict lambda_cone = LambdaConeVerdict::undetermined;
    double lambda_link = 0.0;
    double threshold = 0.0;  // n - 1
};

/**
 * mu^{C(N)} = -infinity iff lambda^N <= n-1; lambda^{C(N)} = 0 iff
 * lambda^N >= n-1 and -infinity iff lambda^N < n-1. Within the tolerance
 * band around the threshold the numerical eigenvalue cannot resolve the
 * equality case (where mu is infinite but lambda-cone is 0), so both
 * verdicts are reported undetermined there.
 */
inline ConeClassification cone_finiteness_classify(const LinkGeometry& link,
                                                   double band = 1e-6,
                                                   std::size_t nodes = 2048) {
    ConeClassification c;
    c.lambda_link = lambda_link(link, nodes);
    c.threshold = link.dim() - 1.0;
    const double d = c.lambda_link - c.threshold;
    if (std::abs(d) <= band) {
        c.mu = MuVerdict::undetermined;
        c.lambda_cone = LambdaConeVerdict::undetermined;
    } else if (d < 0.0) {
        c.mu = MuVerdict::mu_infinite;
        c.lambda_cone = LambdaConeVerdict::minus_infinity;
    } else {
        c.mu = MuVerdict::mu_finite;
        c.lambda_cone = LambdaConeVerdict::zero;
    }
    return c;
}

struct ConeBoundParams {
    double K = 0.0;
    double tau = 0.0;   // minimal Hardy-admissible tau at tau0
    double tau0 = 0.0;
    double A_const = 0.0;
    double D_const = 0.0;
};

/// Largest tau with mu^N(tau) >= -1/2, capped at 1 / (2 n (n-1)).
inline double far_field_tau0(const LinkGeometry& link,
                             const std::function<double(double)>& mu_of_tau) {
    const int n = link.dim();
    const double cap = 1.0 / (2.0 * n * (n - 1));
    if (mu_of_tau(cap) >= -0.5) return cap;
    double lo = cap;
    while (mu_of_tau(lo) < -0.5) lo *= 0.25;
    double hi = std::min(4.0 * lo, cap);
    for (int it = 0; it < 40; ++it) {
        const double mid = std::sqrt(lo * hi);
        (mu_of_tau(mid) >= -0.5 ? lo : hi) = mid;
    }
    return lo;
}

struct ConeNuLowerBound {
    double value = 0.0;  // -D
    ConeBoundParams params;
};

/**
 * Explicit lower bound nu^{C(N)} >= -D assembled from the far-field budget
 * (-1), the envelope constant A, the Hardy/log-Sobolev leftover and the
 * far-field radius constant C = 1/sqrt(tau0):
 *
 *   D = 1 + A - (n+1)/2 log(1 - (-K)/(n-1)^2) + log vol(S^n)
 *         + (n/2) log(C^2 / (4 pi)).
 */
inline ConeNuLowerBound cone_nu_lower_bound(const LinkGeometry& link,
                                            const MuEnvelope& envelope,
                                            const std::function<double(double)>& mu_of_tau) {
    const int n = link.dim();
    const double lambda = envelope.lambda;
    if (lambda <= n - 1.0)
        throw error("dichotomy_infinite", "lower bound needs lambda^N > n - 1");
    ConeNuLowerBound out;
    out.params.K = lambda - n * (n - 1.0);
    out.params.A_const = envelope.offset_A;
    out.params.tau0 = far_field_tau0(link, mu_of_tau);
    const double hardy_ratio =
        out.params.K < 0.0 ? 1.0 - (-out.params.K) / ((n - 1.0) * (n - 1.0)) : 1.0;
    out.params.tau = out.params.tau0 / hardy_ratio;
    const double C2 = 1.0 / out.params.tau0;
    out.params.D_const = 1.0 + envelope.offset_A - 0.5 * (n + 1) * std::log(hardy_ratio) +
                         std::log(sphere_volume(n)) + 0.5 * n * std::log(C2 / (4.0 * pi));
    out.value = -out.params.D_const;
    return out;
}

struct ConeNuUpperBound {
    double value = 0.0;
    ScalarField minimizer;
    MinimizeStatus status = MinimizeStatus::converged;
};

/**
 * Upper bound on nu^{C(N)} by minimizing over radial fields on the truncated
 * window (scale invariance makes a single tau sufficient). For radial fields
 * the link term averages to R_av^N, so the 1D potential is
 * (R_av^N - n(n-1)) / r^2.
 */
inline ConeNuUpperBound cone_nu_upper_bound(const ConeOperator& cone, double tau,
                                            double tolerance = 1e-8) {
    const int n = cone.n;
    auto grid = cone.geometry.radial_grid;
    const double volN = cone.link_op.volume;
    const double Rav = integrate(cone.link_op.R, cone.link_op.m) / volN;
    std::vector<double> m(grid->size()), p(grid->size()), V(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double r = grid->node(i);
        m[i] = volN * std::pow(r, n);
        p[i] = 4.0 * m[i];
        V[i] = (Rav - n * (n - 1.0)) / (r * r);
    }
    FunctionalDescriptor obj;
    obj.quadratic = SturmLiouvilleProblem{ScalarField(grid, m), ScalarField(grid, p),
                                          ScalarField(grid, V), BoundaryKind::neumann_zero,
                                          BoundaryKind::dirichlet_zero};
    obj.tau = tau;
    obj.include_entropy = true;
    obj.offset = -0.5 * (n + 1) * std::log(4.0 * pi * tau) - (n + 1);

    // multi-start: the flat-minimizer Gaussian and a tip-concentrated power
    // spike (the infinite side is only reachable from the spike basin)
    const auto form = detail::assemble_form(obj.quadratic);
    std::vector<ScalarField> inits;
    {
        std::vector<double> g0(grid->size());
        for (std::size_t i = 0; i < grid->size(); ++i) {
            const double r = grid->node(i);
            g0[i] = std::exp(-r * r / (8.0 * tau));
        }
        g0.back() = 0.0;
        inits.push_back(detail::normalized_against(
            form, ScalarField(grid, std::move(g0), BoundaryKind::neumann_zero,
                              BoundaryKind::dirichlet_zero)));
    }
    {
        // spike exponent inside the negative-energy window when one exists
        const double Krad = Rav - n * (n - 1.0);
        double a = 0.5 * (n - 1) + 0.25;
        if (Krad < -(n - 1.0) * (n - 1.0))
            a = 0.5 * (n - 1) + 0.4 * (0.5 * std::sqrt(-Krad) - 0.5 * (n - 1));
        std::vector<double> s0(grid->size());
        for (std::size_t i = 0; i < grid->size(); ++i) {
            const double r = grid->node(i);
            s0[i] = std::pow(r, -a) * std::exp(-r * r / (8.0 * tau));
        }
        s0.back() = 0.0;
        inits.push_back(detail::normalized_against(
            form, ScalarField(grid, std::move(s0), BoundaryKind::neumann_zero,
                              BoundaryKind::dirichlet_zero)));
    }
    ConeNuUpperBound out;
    bool first = true, unbounded = false;
    for (const auto& init : inits) {
        MinimizeResult r = minimize_normalized(obj, init, tolerance);
        if (r.status == MinimizeStatus::unbounded_below) unbounded = true;
        if (first || r.minimum < out.value) {
            out.value = r.minimum;
            out.minimizer = std::move(r.minimizer);
            out.status = r.status;
            first = false;
        }
    }
    if (unbounded) out.status = MinimizeStatus::unbounded_below;
    return out;
}

struct ShrinkingCutoffResult {
    std::vector<double> eps;
    std::vector<double> minima;
    MinimizeStatus status = MinimizeStatus::converged;  // unbounded_below when diverging
};

/**
 * Minimize W on a sequence of truncations with shrinking inner cutoff.
 * Declares unbounded_below when the per-cutoff minima keep dropping
 * substantially over the whole ladder (the finite side converges instead,
 * staying above the -D bound).
 */
inline ShrinkingCutoffResult minimize_with_shrinking_cutoff(
    const LinkGeometry& link, double tau, const std::vector<double>& eps_sequence,
    std::size_t nodes = 1024, double tolerance = 1e-7) {
    ShrinkingCutoffResult out;
    bool any_unbounded = false;
    for (double eps : eps_sequence) {
        ConeGeometry geom(link, eps * std::sqrt(tau), 1e2 * std::sqrt(tau), nodes);
        ConeOperator cone(geom, 256);
        const ConeNuUpperBound ub = cone_nu_upper_bound(cone, tau, tolerance);
        out.eps.push_back(eps);
        out.minima.push_back(ub.value);
        if (ub.status == MinimizeStatus::unbounded_below) any_unbounded = true;
    }
    bool dropping = out.minima.size() >= 4;
    for (std::size_t i = 1; i < out.minima.size(); ++i)
        if (out.minima[i] > out.minima[i - 1] - 0.25) dropping = false;
    const double total = out.minima.front() - out.minima.back();
    if (any_unbounded || (dropping && total > 5.0)) out.status = MinimizeStatus::unbounded_below;
    return out;
}

// ---------------------------------------------------------------------------
// Corollaries: conical singularities and asymptotically conical manifolds
// ---------------------------------------------------------------------------

enum class SingularLambdaVerdict { finite, infinite, undetermined };

struct SingularityReport {
    SingularLambdaVerdict verdict = SingularLambdaVerdict::finite;
    std::string note;
    std::vector<double> link_lambdas;
};

/**
 * lambda^M of a compact n-manifold with conical singularities over the given
 * (n-1)-dimensional links: infinite when some lambda^{N_i} < n-2, finite when
 * all lambda^{N_i} > n-2, undetermined at the threshold.
 */
inline SingularityReport conical_singularity_lambda_classify(
    int ambient_dim, const std::vector<LinkGeometry>& singularity_links, double band = 1e-6,
    std::size_t nodes = 2048) {
    SingularityReport rep;
    if (singularity_links.empty()) {
        rep.note = "no_singularities";
        rep.verdict = SingularLambdaVerdict::finite;
        return rep;
    }
    const double threshold = ambient_dim - 2.0;
    bool any_equal = false;
    for (const auto& link : singularity_links) {
        if (link.dim() != ambient_dim - 1)
            throw error("bad_dimension", "singularity links must have dimension n-1");
        const double lambda = lambda_link(link, nodes);
        rep.link_lambdas.push_back(lambda);
        if (lambda < threshold - band) {
            rep.verdict = SingularLambdaVerdict::infinite;
            return rep;
        }
        if (std::abs(lambda - threshold) <= band) any_equal = true;
    }
    rep.verdict = any_equal ? SingularLambdaVerdict::undetermined
                            : SingularLambdaVerdict::finite;
    return rep;
}

struct AsymptoticNuBound {
    bool minus_infinity = false;
    double upper_bound = 0.0;  // valid when !minus_infinity
};

/// nu^M <= nu^{C(N)} for M smoothly asymptotic to C(N); -infinity when
/// lambda^N is at or below the corollary threshold.
inline AsymptoticNuBound asymptotically_conical_nu_bound(const LinkGeometry& link,
                                                         std::size_t nodes = 1024) {
    const double threshold = link.dim() - 1.0;
    const double lambda = lambda_link(link, nodes);
    if (lambda <= threshold + 1e-6) return AsymptoticNuBound{true, 0.0};
    ConeOperator cone(make_cone(link, 1.0, nodes), 256);
    return AsymptoticNuBound{false, cone_nu_upper_bound(cone, 1.0).value};
}

} // namespace conelab
