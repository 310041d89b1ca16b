#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "conelab/minimize.hpp"

namespace conelab {

struct RoundSphere {
    int dim = 2;      // n
    double beta = 1;  // radius
};

/// Closed n-manifold in warped form  d xi^2 + psi(xi)^2 g_{S^{n-1}} on [0, L].
struct ProfileWarped {
    int dim = 2;
    ScalarField psi;     // pole_regular ends, psi = 0 there
    bool closed = true;  // open profiles are only used as flow snapshots
};

/// Einstein data Ric = g / (2 T_N); only (lambda, vol, T_N) enter the formulas.
struct EinsteinLink {
    int dim = 2;
    double lambda = 0;
    double volume = 0;
    double shrinking_time = 0;
};

class LinkGeometry {
public:
    LinkGeometry(RoundSphere r) : data_(r) {
        if (r.beta <= 0) throw error("bad_link", "round sphere needs beta > 0");
        if (r.dim < 2) throw error("bad_link", "link dimension must be >= 2");
    }
    LinkGeometry(ProfileWarped p) : data_(std::move(p)) {
        const auto& pw = std::get<ProfileWarped>(data_);
        if (pw.dim < 2) throw error("bad_link", "link dimension must be >= 2");
        if (pw.closed) validate_closed_profile(pw);
    }
    LinkGeometry(EinsteinLink e) : data_(e) {
        if (e.lambda <= 0) throw error("bad_link", "Einstein data needs lambda > 0");
        if (std::abs(e.shrinking_time - e.dim / (2.0 * e.lambda)) >
            1e-8 * (std::abs(e.shrinking_time) + 1.0))
            throw error("bad_link", "Einstein T_N must equal n / (2 lambda)");
    }

    int dim() const {
        return std::visit([](const auto& v) { return v.dim; }, data_);
    }

    bool is_round() const { return std::holds_alternative<RoundSphere>(data_); }
    bool is_profile() const { return std::holds_alternative<ProfileWarped>(data_); }
    bool is_einstein() const { return std::holds_alternative<EinsteinLink>(data_); }

    const RoundSphere& round() const { return std::get<RoundSphere>(data_); }
    const ProfileWarped& profile() const { return std::get<ProfileWarped>(data_); }
    const EinsteinLink& einstein() const { return std::get<EinsteinLink>(data_); }

    double volume(std::size_t nodes = 2048) const;

    /// g -> factor^2 g.
    LinkGeometry rescaled(double factor) const;

private:
    static void validate_closed_profile(const ProfileWarped& pw) {
        const auto& psi = pw.psi;
        const auto& g = psi.grid();
        for (std::size_t i = 1; i + 1 < g.size(); ++i)
            if (psi[i] <= 0.0) throw error("degenerate_profile", "psi must be positive inside");
        if (psi.values().front() != 0.0 || psi.values().back() != 0.0)
            throw error("degenerate_profile", "closed profile needs psi = 0 at the poles");
        const ScalarField dpsi = differentiate(psi);
        if (std::abs(std::abs(dpsi.values().front()) - 1.0) > 2e-2 ||
            std::abs(std::abs(dpsi.values().back()) - 1.0) > 2e-2)
            throw error("bad_pole_closure", "|psi'| must be 1 at the poles");
    }

    std::variant<RoundSphere, ProfileWarped, EinsteinLink> data_;
};

/// Geodesic-polar profile of the round n-sphere of radius beta: beta sin(xi/beta).
inline ProfileWarped round_profile(int n, double beta, std::size_t nodes = 2048) {
    auto grid = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, pi * beta, nodes));
    std::vector<double> v(nodes);
    for (std::size_t i = 0; i < nodes; ++i) v[i] = beta * std::sin(grid->node(i) / beta);
    v.front() = 0.0;
    v.back() = 0.0;
    ScalarField psi(grid, std::move(v), BoundaryKind::pole_regular, BoundaryKind::pole_regular);
    return ProfileWarped{n, std::move(psi), true};
}

struct FunctionalQuery {
    double tau = 1.0;
    int dim = 2;
};

/// Large-tau envelope mu(tau) >= lambda tau - A - (n/2) log_+ tau.
struct MuEnvelope {
    double lambda = 0.0;
    double offset_A = 0.0;
    int dim = 2;

    double value(double tau) const {
        return lambda * tau - offset_A - 0.5 * dim * std::max(std::log(tau), 0.0);
    }
};

/**
 * Everything the invariant-class functionals need on one link: the volume
 * density m = vol(S^{n-1}) psi^{n-1}, the -4 Lap + R quadratic form data,
 * and the curvature profile.
 */
struct LinkOperator {
    std::shared_ptr<const RadialGrid> grid;
    ScalarField m;  // volume density, pole_regular ends
    ScalarField p;  // 4 m
    ScalarField R;  // scalar curvature samples
    int n = 2;
    double volume = 0.0;
};

/// Scalar curvature of a warped profile, one-sided at the poles.
inline ScalarField profile_scalar_curvature(const ProfileWarped& pw) {
    const int n = pw.dim;
    const auto& psi = pw.psi;
    const std::size_t N = psi.size();
    for (std::size_t i = 1; i + 1 < N; ++i)
        if (psi[i] <= 0.0) throw error("degenerate_profile", "psi must be positive inside");
    const ScalarField d1 = differentiate(psi, 4);
    const ScalarField d2 = differentiate_twice(psi, 4);
    std::vector<double> R(N, 0.0);
    for (std::size_t i = 1; i + 1 < N; ++i) {
        const double s = psi[i];
        R[i] = (n - 1) * ((n - 2) * (1.0 - d1[i] * d1[i]) - 2.0 * s * d2[i]) / (s * s);
    }
    // poles: quadratic one-sided extrapolation from the interior
    R[0] = psi[0] > 0.0
               ? (n - 1) * ((n - 2) * (1.0 - d1[0] * d1[0]) - 2.0 * psi[0] * d2[0]) /
                     (psi[0] * psi[0])
               : 2.0 * R[1] - R[2];
    R[N - 1] = psi[N - 1] > 0.0
                   ? (n - 1) *
                         ((n - 2) * (1.0 - d1[N - 1] * d1[N - 1]) - 2.0 * psi[N - 1] * d2[N - 1]) /
                         (psi[N - 1] * psi[N - 1])
                   : 2.0 * R[N - 2] - R[N - 3];
    return ScalarField(psi.grid_ptr(), std::move(R));
}

inline LinkOperator link_operator(const LinkGeometry& link, std::size_t nodes = 2048) {
    ProfileWarped pw = link.is_round()
                           ? round_profile(link.round().dim, link.round().beta, nodes)
                           : link.profile();
    if (link.is_einstein())
        throw error("no_profile", "Einstein links carry no profile; use the closed forms");
    const int n = pw.dim;
    const double fiber = sphere_volume(n - 1);
    std::vector<double> m(pw.psi.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = fiber * std::pow(pw.psi[i], n - 1);
    LinkOperator op;
    op.grid = pw.psi.grid_ptr();
    op.m = ScalarField(op.grid, m, BoundaryKind::pole_regular, BoundaryKind::pole_regular);
    std::vector<double> p4(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) p4[i] = 4.0 * m[i];
    op.p = ScalarField(op.grid, std::move(p4), BoundaryKind::pole_regular,
                       BoundaryKind::pole_regular);
    if (link.is_round()) {
        const double beta = link.round().beta;
        op.R = ScalarField::constant(op.grid, n * (n - 1) / (beta * beta));
    } else {
        op.R = profile_scalar_curvature(pw);
    }
    op.n = n;
    op.volume = integrate(op.m);
    return op;
}

inline double LinkGeometry::volume(std::size_t nodes) const {
    if (is_round()) {
        const auto& r = round();
        return std::pow(r.beta, r.dim) * sphere_volume(r.dim);
    }
    if (is_einstein()) return einstein().volume;
    return link_operator(*this, nodes).volume;
}

inline LinkGeometry LinkGeometry::rescaled(double factor) const {
    if (factor <= 0) throw error("bad_link", "rescale factor must be positive");
    if (is_round()) return LinkGeometry(RoundSphere{round().dim, round().beta * factor});
    if (is_einstein()) {
        const auto& e = einstein();
        return LinkGeometry(EinsteinLink{e.dim, e.lambda / (factor * factor),
                                         e.volume * std::pow(factor, e.dim),
                                         e.shrinking_time * factor * factor});
    }
    const auto& pw = profile();
    const auto& g = pw.psi.grid();
    auto grid = std::make_shared<RadialGrid>(
        RadialGrid::uniform(factor * g.nodes().front(), factor * g.nodes().back(), g.size()));
    std::vector<double> v(pw.psi.values());
    for (auto& x : v) x *= factor;
    ScalarField psi(grid, std::move(v), pw.psi.left_boundary(), pw.psi.right_boundary());
    return LinkGeometry(ProfileWarped{pw.dim, std::move(psi), pw.closed});
}

inline ScalarField scalar_curvature_link(const LinkGeometry& link, std::size_t nodes = 2048) {
    if (link.is_round()) {
        const auto& r = link.round();
        auto grid = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, pi * r.beta, nodes));
        return ScalarField::constant(grid, r.dim * (r.dim - 1) / (r.beta * r.beta));
    }
    if (link.is_einstein()) {
        const auto& e = link.einstein();
        auto grid = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, pi, 16));
        return ScalarField::constant(grid, e.dim / (2.0 * e.shrinking_time));
    }
    return profile_scalar_curvature(link.profile());
}

/// lambda(g) = smallest eigenvalue of -4 Lap + R on the invariant class.
inline double lambda_link(const LinkGeometry& link, std::size_t nodes = 2048) {
    if (link.is_einstein()) return link.einstein().lambda;
    const LinkOperator op = link_operator(link, nodes);
    SturmLiouvilleProblem sl{op.m, op.p, op.R};
    return eigen_smallest(sl).eigenvalue;
}

inline EigenResult lambda_link_full(const LinkGeometry& link, std::size_t nodes = 2048) {
    const LinkOperator op = link_operator(link, nodes);
    SturmLiouvilleProblem sl{op.m, op.p, op.R};
    return eigen_smallest(sl);
}

/// W(u, g, tau) with Int u^2 dv = 1; u^2 log u^2 taken as 0 where u = 0.
inline double w_functional_link(const LinkOperator& op, const ScalarField& u,
                                const FunctionalQuery& q) {
    const detail::AssembledForm form =
        detail::assemble_form(SturmLiouvilleProblem{op.m, op.p, op.R});
    std::vector<double> v = form.restrict_field(u);
    const double mass = form.mass(v);
    if (std::abs(mass - 1.0) > 1e-6)
        throw error("not_normalized", "w_functional_link needs unit L2(dv) mass");
    double ent = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) ent += form.bmass[i] * xlogx(v[i] * v[i]);
    return q.tau * form.energy(v) - ent - 0.5 * op.n * std::log(4.0 * pi * q.tau) - op.n;
}

inline double w_functional_link(const LinkGeometry& link, const ScalarField& u,
                                const FunctionalQuery& q, std::size_t nodes = 2048) {
    return w_functional_link(link_operator(link, nodes), u, q);
}

/// Closed form mu of an Einstein link for tau >= T_N (Ric = g / (2 T_N)).
inline double mu_einstein_closed_form(const EinsteinLink& e, const FunctionalQuery& q) {
    if (q.tau < e.shrinking_time * (1.0 - 1e-12))
        throw error("below_shrinking_time", "closed form is only claimed for tau >= T_N");
    return q.tau * e.lambda + std::log(e.volume) -
           0.5 * e.dim * std::log(4.0 * pi * q.tau) - e.dim;
}

inline EinsteinLink einstein_of_round(const RoundSphere& r) {
    const int n = r.dim;
    const double lambda = n * (n - 1) / (r.beta * r.beta);
    return EinsteinLink{n, lambda, std::pow(r.beta, n) * sphere_volume(n),
                        n / (2.0 * lambda)};
}

struct MuEstimate {
    double value = 0.0;          // upper bound on mu(g, tau)
    ScalarField minimizer;       // best invariant-class candidate
    MinimizeStatus status = MinimizeStatus::converged;
    bool upper_bound = true;     // always: minimization over the invariant class
};

namespace detail {

inline ScalarField normalized_against(const AssembledForm& form, const ScalarField& raw) {
    std::vector<double> v = form.restrict_field(raw);
    const double mass = form.mass(v);
    std::vector<double> out(raw.values());
    const double s = 1.0 / std::sqrt(mass);
    for (auto& x : out) x *= s;
    return ScalarField(raw.grid_ptr(), std::move(out), raw.left_boundary(),
                       raw.right_boundary());
}

} // namespace detail

/**
 * Upper-bound estimate of mu(g, tau) by projected gradient descent over the
 * invariant class, multi-started from the constant and pole-centered
 * Gaussian bumps (the small-tau minimizer concentrates at a pole).
 */
inline MuEstimate mu_link(const LinkOperator& op, const FunctionalQuery& q,
                          double tolerance = 1e-6) {
    // descend on W / max(tau, 1): same minimizer, far better conditioning at
    // large tau where the entropy term is a vanishing correction
    const double scale = std::max(q.tau, 1.0);
    FunctionalDescriptor obj;
    obj.quadratic = SturmLiouvilleProblem{op.m, op.p, op.R};
    obj.tau = q.tau / scale;
    obj.include_entropy = true;
    obj.entropy_weight = 1.0 / scale;
    obj.offset = (-0.5 * op.n * std::log(4.0 * pi * q.tau) - op.n) / scale;
    const detail::AssembledForm form = detail::assemble_form(obj.quadratic);

    std::vector<ScalarField> inits;
    inits.push_back(detail::normalized_against(form, ScalarField::constant(op.grid, 1.0)));
    const double L = op.grid->length();
    for (double s : {0.5 * q.tau, q.tau, 2.0 * q.tau}) {
        if (std::sqrt(s) > 2.0 * L) continue;  // wider than the manifold: constant covers it
        for (bool flip : {false, true}) {
            std::vector<double> v(op.grid->size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double xi = flip ? op.grid->nodes().back() - op.grid->node(i)
                                       : op.grid->node(i) - op.grid->nodes().front();
                v[i] = std::exp(-xi * xi / (4.0 * s));
            }
            inits.push_back(detail::normalized_against(
                form, ScalarField(op.grid, std::move(v))));
        }
    }

    std::optional<MinimizeResult> best;
    for (const auto& init : inits) {
        MinimizeResult r = minimize_normalized(obj, init, tolerance);
        if (!best || r.minimum < best->minimum) best = std::move(r);
    }
    return MuEstimate{scale * best->minimum, best->minimizer, best->status, true};
}

inline MuEstimate mu_link(const LinkGeometry& link, const FunctionalQuery& q,
                          double tolerance = 1e-6, std::size_t nodes = 2048) {
    if (link.is_einstein())
        return MuEstimate{mu_einstein_closed_form(link.einstein(), q), ScalarField{},
                          MinimizeStatus::converged, false};
    return mu_link(link_operator(link, nodes), q, tolerance);
}

struct NuResult {
    double nu = 0.0;
    double argmin_tau = 0.0;
};

/// Minimum of mu over the tau grid with golden-section refinement.
inline NuResult nu_link(const LinkGeometry& link, const std::vector<double>& tau_grid,
                        double tolerance = 1e-6, std::size_t nodes = 2048) {
    if (tau_grid.empty()) throw error("bad_query", "nu_link needs a nonempty tau grid");
    if (link.is_einstein()) {
        const auto& e = link.einstein();
        return NuResult{mu_einstein_closed_form(e, {e.shrinking_time, e.dim}),
                        e.shrinking_time};
    }
    const LinkOperator op = link_operator(link, nodes);
    auto mu_at = [&](double tau) { return mu_link(op, {tau, op.n}, tolerance).value; };

    std::vector<double> values(tau_grid.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        values[i] = mu_at(tau_grid[i]);
        if (values[i] < values[k]) k = i;
    }
    double lo = tau_grid[k > 0 ? k - 1 : k];
    double hi = tau_grid[k + 1 < tau_grid.size() ? k + 1 : k];
    if (lo == hi) return NuResult{values[k], tau_grid[k]};

    // golden section in log tau
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(lo), b = std::log(hi);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = mu_at(std::exp(x1)), f2 = mu_at(std::exp(x2));
    for (int it = 0; it < 25 && (b - a) > 1e-4; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = mu_at(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = mu_at(std::exp(x2));
        }
    }
    const double tau_best = std::exp(f1 < f2 ? x1 : x2);
    const double v_best = std::min(f1, f2);
    if (v_best < values[k]) return NuResult{v_best, tau_best};
    return NuResult{values[k], tau_grid[k]};
}

/// Default nu search grid: logarithmic over [1e-3, 1e3], 31 points.
inline std::vector<double> default_tau_grid() {
    std::vector<double> g(31);
    for (int i = 0; i < 31; ++i) g[i] = std::pow(10.0, -3.0 + 6.0 * i / 30.0);
    return g;
}

struct EnvelopeReport {
    double worst_violation = 0.0;  // max over pairs of (chain rhs - mu(tau1)), >0 violates
    std::size_t pair_count = 0;
    bool pass = true;
};

/**
 * Chain inequality mu(tau1) >= mu(tau2) + (tau1 - tau2) lambda
 * - (n/2) log(tau1/tau2) for every sample pair tau1 > tau2.
 */
inline EnvelopeReport mu_envelope_check(const std::vector<std::pair<double, double>>& mu_samples,
                                        double lambda, int dim, double tolerance = 1e-8) {
    for (std::size_t i = 1; i < mu_samples.size(); ++i)
        if (mu_samples[i].first <= mu_samples[i - 1].first)
            throw error("bad_query", "mu samples must be sorted by increasing tau");
    EnvelopeReport rep;
    for (std::size_t j = 0; j < mu_samples.size(); ++j)
        for (std::size_t i = j + 1; i < mu_samples.size(); ++i) {
            const auto [tau2, mu2] = mu_samples[j];
            const auto [tau1, mu1] = mu_samples[i];
            const double rhs =
                mu2 + (tau1 - tau2) * lambda - 0.5 * dim * std::log(tau1 / tau2);
            rep.worst_violation = std::max(rep.worst_violation, rhs - mu1);
            ++rep.pair_count;
        }
    rep.pass = rep.worst_violation <= tolerance;
    return rep;
}

/// Fit of the envelope constant A from a mu grid (clamped below at 0).
inline MuEnvelope fit_mu_envelope(const std::vector<std::pair<double, double>>& mu_samples,
                                  double lambda, int dim) {
    double A = 0.0;
    for (const auto& [tau, mu] : mu_samples)
        A = std::max(A, lambda * tau - 0.5 * dim * std::max(std::log(tau), 0.0) - mu);
    return MuEnvelope{lambda, A, dim};
}

struct DriftReport {
    std::vector<double> tau;
    std::vector<double> h1_distance;
    bool non_increasing_tail = true;
};

/// H1 distance of each W-minimizer to the F ground state along a tau sweep.
inline DriftReport minimizer_drift_check(const LinkGeometry& link,
                                         const std::vector<double>& tau_sequence,
                                         double tolerance = 1e-6, std::size_t nodes = 2048) {
    if (tau_sequence.size() < 3)
        throw error("bad_query", "minimizer_drift_check needs at least 3 tau values");
    const LinkOperator op = link_operator(link, nodes);
    const EigenResult ground = eigen_smallest(SturmLiouvilleProblem{op.m, op.p, op.R});
    const double lambda_scale = op.n / (2.0 * std::max(ground.eigenvalue, 1e-12));
    if (tau_sequence.back() < 10.0 * lambda_scale)
        throw error("bad_query", "largest tau must reach 10x the lambda scale");

    DriftReport rep;
    for (double tau : tau_sequence) {
        const MuEstimate est = mu_link(op, {tau, op.n}, tolerance);
        std::vector<double> diff(op.grid->size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = est.minimizer[i] - ground.eigenfunction[i];
        ScalarField d(op.grid, std::move(diff));
        ScalarField dd = differentiate(d);
        double h1 = 0.0;
        const auto& w = op.grid->weights();
        for (std::size_t i = 0; i < w.size(); ++i)
            h1 += w[i] * op.m[i] * (d[i] * d[i] + dd[i] * dd[i]);
        rep.tau.push_back(tau);
        rep.h1_distance.push_back(std::sqrt(h1));
    }
    for (std::size_t i = rep.tau.size() / 2 + 1; i < rep.tau.size(); ++i)
        if (rep.h1_distance[i] > rep.h1_distance[i - 1] + 1e-9)
            rep.non_increasing_tail = false;
    return rep;
}

} // namespace conelab
