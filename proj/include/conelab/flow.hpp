#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "conelab/link.hpp"

namespace conelab {

enum class AlphaRule { none, volume_preserving, shrinking_time_preserving, fixed };

struct FlowConfig {
    AlphaRule alpha_rule = AlphaRule::none;
    double fixed_alpha = 0.0;       // for AlphaRule::fixed; pinned by run_flow for
                                    // the shrinking-time rule (the time is preserved)
    double dt_safety = 0.2;         // explicit-step factor, <= 0.5
    double t_end = 0.0;
    double tau0 = 0.0;              // W(tau0 - t) monitor scale for the plain flow
    std::size_t sample_count = 200; // states kept along the trajectory

    void validate() const {
        if (!(dt_safety > 0.0 && dt_safety <= 0.5))
            throw error("bad_query", "dt_safety must lie in (0, 0.5]");
    }
};

/**
 * Snapshot of a rotationally symmetric flow. Round states evolve exactly by
 * the ODE path; warped states carry the fixed-coordinate fields
 * g = phi_m(xi)^2 dxi^2 + psi(xi)^2 g_{S^{n-1}} plus the potential f.
 */
struct FlowState {
    double time = 0.0;
    int n = 2;  // link dimension
    bool round = false;

    // round path
    double beta_sq = 1.0;
    double f_round = 0.0;

    // warped path (fixed coordinate grid; phi_m = 1 in the arclength gauge)
    std::shared_ptr<const RadialGrid> grid;
    std::vector<double> phi_m, psi, f;
    bool open_right = false;  // truncated profiles (monitor inputs) end away
                              // from a pole on the right

    double normalization = 1.0;       // Int e^{-f} dv, tracked
    double norm_shift_applied = 0.0;  // cumulative renormalization shift (logged)

    LinkGeometry link() const;

    ScalarField potential_phi() const {
        if (round) {
            auto g = std::make_shared<RadialGrid>(
                RadialGrid::uniform(0.0, pi * std::sqrt(beta_sq), 64));
            return ScalarField::constant(g, f_round);
        }
        return ScalarField(grid, f);
    }
};

namespace flowdetail {

/// 4th-order first and second xi-derivatives with parity ghosts at both ends
/// (parity +1: even extension, -1: odd extension).
struct ParityDeriv {
    double h = 0.0;
    int parity_left = 1, parity_right = 1;

    double ghost(const std::vector<double>& u, long i) const {
        const long n = long(u.size());
        if (i >= 0 && i < n) return u[std::size_t(i)];
        if (i < 0) return parity_left * u[std::size_t(-i)];
        return parity_right * u[std::size_t(2 * (n - 1) - i)];
    }

    void d1(const std::vector<double>& u, std::vector<double>& out) const {
        const long n = long(u.size());
        out.resize(u.size());
        for (long i = 0; i < n; ++i)
            out[std::size_t(i)] = (-ghost(u, i + 2) + 8.0 * ghost(u, i + 1) -
                                   8.0 * ghost(u, i - 1) + ghost(u, i - 2)) /
                                  (12.0 * h);
    }
    void d2(const std::vector<double>& u, std::vector<double>& out) const {
        const long n = long(u.size());
        out.resize(u.size());
        for (long i = 0; i < n; ++i)
            out[std::size_t(i)] =
                (-ghost(u, i + 2) + 16.0 * ghost(u, i + 1) - 30.0 * u[std::size_t(i)] +
                 16.0 * ghost(u, i - 1) - ghost(u, i - 2)) /
                (12.0 * h * h);
    }
};

/// Pointwise geometry of a warped slice; pole rows of the curvature proxies
/// are filled by even-function Richardson extrapolation.
struct SliceGeometry {
    std::vector<double> psi_s, psi_ss, f_s, f_ss, k_rad, k_sph, R, lap_f, hess_fib;

    void compute(const FlowState& s, bool with_potential = true) {
        const std::size_t N = s.psi.size();
        const int m = s.n - 1;
        const double h = s.grid->spacing(0);
        ParityDeriv dodd{h, -1, -1}, deven{h, 1, 1};
        std::vector<double> psi_x, psi_xx, phi_x, f_x, f_xx;
        dodd.d1(s.psi, psi_x);
        dodd.d2(s.psi, psi_xx);
        deven.d1(s.phi_m, phi_x);
        if (s.open_right) {
            // one-sided stencils at a truncated (non-pole) right end
            for (std::size_t i = N - 3; i < N; ++i) {
                psi_x[i] = (3.0 * s.psi[i] - 4.0 * s.psi[i - 1] + s.psi[i - 2]) / (2.0 * h);
                psi_xx[i] = (2.0 * s.psi[i] - 5.0 * s.psi[i - 1] + 4.0 * s.psi[i - 2] -
                             s.psi[i - 3]) /
                            (h * h);
                phi_x[i] =
                    (3.0 * s.phi_m[i] - 4.0 * s.phi_m[i - 1] + s.phi_m[i - 2]) / (2.0 * h);
            }
        }
        psi_s.resize(N);
        psi_ss.resize(N);
        k_rad.resize(N);
        k_sph.resize(N);
        R.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double ph = s.phi_m[i];
            psi_s[i] = psi_x[i] / ph;
            psi_ss[i] = (psi_xx[i] - psi_x[i] * phi_x[i] / ph) / (ph * ph);
        }
        for (std::size_t i = 1; i + 1 < N; ++i) {
            k_rad[i] = -psi_ss[i] / s.psi[i];
            k_sph[i] = (1.0 - psi_s[i] * psi_s[i]) / (s.psi[i] * s.psi[i]);
        }
        k_rad[0] = (4.0 * k_rad[1] - k_rad[2]) / 3.0;
        k_sph[0] = (4.0 * k_sph[1] - k_sph[2]) / 3.0;
        if (s.open_right) {
            k_rad[N - 1] = -psi_ss[N - 1] / s.psi[N - 1];
            k_sph[N - 1] =
                (1.0 - psi_s[N - 1] * psi_s[N - 1]) / (s.psi[N - 1] * s.psi[N - 1]);
        } else {
            k_rad[N - 1] = (4.0 * k_rad[N - 2] - k_rad[N - 3]) / 3.0;
            k_sph[N - 1] = (4.0 * k_sph[N - 2] - k_sph[N - 3]) / 3.0;
        }
        for (std::size_t i = 0; i < N; ++i)
            R[i] = 2.0 * m * k_rad[i] + m * (m - 1.0) * k_sph[i];

        if (!with_potential) return;
        deven.d1(s.f, f_x);
        deven.d2(s.f, f_xx);
        f_s.resize(N);
        f_ss.resize(N);
        lap_f.resize(N);
        hess_fib.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double ph = s.phi_m[i];
            f_s[i] = f_x[i] / ph;
            f_ss[i] = (f_xx[i] - f_x[i] * phi_x[i] / ph) / (ph * ph);
        }
        for (std::size_t i = 1; i + 1 < N; ++i) {
            hess_fib[i] = psi_s[i] / s.psi[i] * f_s[i];
            lap_f[i] = f_ss[i] + m * hess_fib[i];
        }
        // at a pole, (psi_s/psi) f_s -> f_ss
        hess_fib[0] = f_ss[0];
        hess_fib[N - 1] = f_ss[N - 1];
        lap_f[0] = (1.0 + m) * f_ss[0];
        lap_f[N - 1] = (1.0 + m) * f_ss[N - 1];
    }
};

} // namespace flowdetail

inline LinkGeometry FlowState::link() const {
    if (round) return LinkGeometry(RoundSphere{n, std::sqrt(beta_sq)});
    const std::size_t N = psi.size();
    std::vector<double> s(N, 0.0);
    const double h = grid->spacing(0);
    for (std::size_t i = 1; i < N; ++i)
        s[i] = s[i - 1] + 0.5 * h * (phi_m[i - 1] + phi_m[i]);
    auto g2 = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, s.back(), N));
    std::vector<double> resampled(N);
    std::size_t j = 1;
    for (std::size_t i = 0; i < N; ++i) {
        const double t = g2->node(i);
        while (j + 1 < N && s[j] < t) ++j;
        const double w = (t - s[j - 1]) / (s[j] - s[j - 1]);
        resampled[i] = psi[j - 1] * (1.0 - w) + psi[j] * w;
    }
    resampled.front() = 0.0;
    resampled.back() = 0.0;
    ScalarField pf(g2, std::move(resampled), BoundaryKind::pole_regular,
                   BoundaryKind::pole_regular);
    return LinkGeometry(ProfileWarped{n, std::move(pf), true});
}

/// Round-sphere Ricci flow ODE: beta(t)^2 = beta0^2 - 2 (n-1) t.
inline FlowState ricci_flow_round_ode(double beta0, int n, double t) {
    const double TN = beta0 * beta0 / (2.0 * (n - 1));
    if (t >= TN) throw error("past_extinction", "t must be below beta0^2 / (2(n-1))");
    FlowState s;
    s.time = t;
    s.n = n;
    s.round = true;
    s.beta_sq = beta0 * beta0 - 2.0 * (n - 1) * t;
    s.f_round = std::log(std::pow(s.beta_sq, 0.5 * n) * sphere_volume(n));
    return s;
}

inline FlowState make_round_state(int n, double beta0) {
    return ricci_flow_round_ode(beta0, n, 0.0);
}

/// Warped state from a closed profile: arclength gauge, constant potential
/// normalized to unit e^{-f} mass.
inline FlowState make_profile_state(const ProfileWarped& pw) {
    FlowState s;
    s.n = pw.dim;
    s.round = false;
    s.grid = pw.psi.grid_ptr();
    s.psi = pw.psi.values();
    s.phi_m.assign(s.psi.size(), 1.0);
    s.f.assign(s.psi.size(), std::log(LinkGeometry(pw).volume(s.psi.size())));
    return s;
}

inline double flow_volume(const FlowState& s) {
    if (s.round) return std::pow(s.beta_sq, 0.5 * s.n) * sphere_volume(s.n);
    const int m = s.n - 1;
    double vol = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i)
        vol += s.grid->weight(i) * std::pow(s.psi[i], m) * s.phi_m[i];
    return vol * sphere_volume(m);
}

inline double flow_potential_mass(const FlowState& s) {
    if (s.round) return flow_volume(s) * std::exp(-s.f_round);
    const int m = s.n - 1;
    double mass = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i)
        mass += s.grid->weight(i) * std::pow(s.psi[i], m) * s.phi_m[i] * std::exp(-s.f[i]);
    return mass * sphere_volume(m);
}

/// sup |Rm| with |Rm|^2 = 4 (n-1) K_rad^2 + 2 (n-1)(n-2) K_sph^2.
inline double flow_sup_rm(const FlowState& s) {
    const int m = s.n - 1;
    if (s.round) {
        const double k = 1.0 / s.beta_sq;
        return std::sqrt(4.0 * m + 2.0 * m * (m - 1.0)) * k;
    }
    flowdetail::SliceGeometry geo;
    geo.compute(s, false);
    double sup = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
        const double rm2 = 4.0 * m * geo.k_rad[i] * geo.k_rad[i] +
                           2.0 * m * (m - 1.0) * geo.k_sph[i] * geo.k_sph[i];
        sup = std::max(sup, std::sqrt(rm2));
    }
    return sup;
}

inline double flow_f_functional(const FlowState& s) {
    if (s.round) return s.n * (s.n - 1.0) / s.beta_sq;
    flowdetail::SliceGeometry geo;
    geo.compute(s);
    const int m = s.n - 1;
    const double shift = std::log(flow_potential_mass(s));
    double F = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
        const double w = s.grid->weight(i) * std::pow(s.psi[i], m) * s.phi_m[i] *
                         sphere_volume(m) * std::exp(-(s.f[i] + shift));
        F += w * (geo.f_s[i] * geo.f_s[i] + geo.R[i]);
    }
    return F;
}

inline double flow_w_functional(const FlowState& s, double tau) {
    const int n = s.n;
    if (s.round)
        return tau * n * (n - 1.0) / s.beta_sq + std::log(flow_volume(s)) -
               0.5 * n * std::log(4.0 * pi * tau) - n;
    flowdetail::SliceGeometry geo;
    geo.compute(s);
    const int m = n - 1;
    const double shift = std::log(flow_potential_mass(s));  // phi = f + shift
    double F = 0.0, N = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
        const double phi = s.f[i] + shift;
        const double w = s.grid->weight(i) * std::pow(s.psi[i], m) * s.phi_m[i] *
                         sphere_volume(m) * std::exp(-phi);
        F += w * (geo.f_s[i] * geo.f_s[i] + geo.R[i]);
        N += w * phi;
    }
    return tau * F + N - 0.5 * n * std::log(4.0 * pi * tau) - n;
}

inline double flow_r_average(const FlowState& s) {
    if (s.round) return s.n * (s.n - 1.0) / s.beta_sq;
    flowdetail::SliceGeometry geo;
    geo.compute(s, false);
    const int m = s.n - 1;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
        const double w = s.grid->weight(i) * std::pow(s.psi[i], m) * s.phi_m[i];
        num += w * geo.R[i];
        den += w;
    }
    return num / den;
}

/// Max interior deviation of the sectional proxy (1 - psi_s^2)/psi^2 from
/// its mean, relative; 0 on round slices.
inline double roundness_metric(const FlowState& s) {
    if (s.round) return 0.0;
    flowdetail::SliceGeometry geo;
    geo.compute(s, false);
    double mean = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 1; i + 1 < s.psi.size(); ++i) {
        mean += geo.k_sph[i];
        ++cnt;
    }
    mean /= double(cnt);
    double dev = 0.0;
    for (std::size_t i = 1; i + 1 < s.psi.size(); ++i)
        dev = std::max(dev, std::abs(geo.k_sph[i] - mean) / std::max(std::abs(mean), 1e-12));
    return dev;
}

namespace flowdetail {

struct MetricRhs {
    std::vector<double> dphi, dpsi;
};

/// Plain Ricci flow plus an optional uniform scaling term (2 alpha / n) g.
/// The Hess f term of the renormalized system is pure gauge (a
/// diffeomorphism flow); trajectories carry the identical geometry, so the
/// metric path is integrated gauge-free and stays parabolic.
inline void metric_rhs(const FlowState& s, double alpha, MetricRhs& out) {
    const std::size_t N = s.psi.size();
    const int n = s.n, m = n - 1;
    SliceGeometry geo;
    geo.compute(s, false);
    out.dphi.assign(N, 0.0);
    out.dpsi.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double ric_ss = m * geo.k_rad[i];
        const double ric_fib = geo.k_rad[i] + (m - 1.0) * geo.k_sph[i];
        out.dphi[i] = s.phi_m[i] * (-ric_ss + alpha / n);
        out.dpsi[i] = s.psi[i] * (-ric_fib + alpha / n);
    }
    out.dpsi.front() = 0.0;
    out.dpsi.back() = 0.0;
}

inline void check_positive(const std::vector<double>& psi, double time) {
    for (std::size_t i = 1; i + 1 < psi.size(); ++i)
        if (!(psi[i] > 0.0))
            throw error("flow_singular",
                        "profile degenerate at t = " + std::to_string(time));
}

} // namespace flowdetail

double shrinking_time_estimate(const FlowState& state, double roundness_threshold = 1e-3);

inline double resolve_alpha(const FlowState& s, const FlowConfig& config) {
    switch (config.alpha_rule) {
        case AlphaRule::none: return 0.0;
        case AlphaRule::volume_preserving: return flow_r_average(s);
        case AlphaRule::fixed: return config.fixed_alpha;
        case AlphaRule::shrinking_time_preserving:
            return config.fixed_alpha != 0.0
                       ? config.fixed_alpha
                       : s.n / (2.0 * shrinking_time_estimate(s));
    }
    return 0.0;
}

inline double stable_dt(const FlowState& s, const FlowConfig& config) {
    if (s.round) return std::max(1e-8, config.dt_safety * 0.005 * s.beta_sq);
    double mind = 1e300;
    const double h = s.grid->spacing(0);
    for (double p : s.phi_m) mind = std::min(mind, p * h);
    return config.dt_safety * mind * mind;
}

/**
 * One explicit step of the metric path (Heun), with the potential advanced
 * by the matching equation: d_t f = -Lap f + |grad f|^2 - R (+ alpha - n
 * terms under a renormalization). Round states advance exactly.
 *
 * The forward potential step is only consistent over short spans (the
 * conjugate equation is backward-parabolic); run_flow integrates the
 * potential stably by the reverse-time pass instead.
 */
inline FlowState flow_step(const FlowState& state, const FlowConfig& config, double dt) {
    config.validate();
    FlowState out = state;
    const int n = state.n;
    const double alpha = resolve_alpha(state, config);
    out.time = state.time + dt;
    if (state.round) {
        if (alpha == 0.0) {
            out.beta_sq = state.beta_sq - 2.0 * (n - 1) * dt;
        } else {
            const double eq = n * (n - 1.0) / alpha;
            out.beta_sq = eq + (state.beta_sq - eq) * std::exp(2.0 * alpha * dt / n);
        }
        if (out.beta_sq <= 0.0) throw error("past_extinction", "round sphere extinct");
        out.f_round = std::log(std::pow(out.beta_sq, 0.5 * n) * sphere_volume(n));
        return out;
    }

    flowdetail::MetricRhs k1, k2;
    flowdetail::metric_rhs(state, alpha, k1);
    FlowState mid = state;
    const std::size_t N = state.psi.size();
    for (std::size_t i = 0; i < N; ++i) {
        mid.phi_m[i] += dt * k1.dphi[i];
        mid.psi[i] += dt * k1.dpsi[i];
    }
    flowdetail::check_positive(mid.psi, state.time);
    const double alpha_mid =
        config.alpha_rule == AlphaRule::volume_preserving ? flow_r_average(mid) : alpha;
    flowdetail::metric_rhs(mid, alpha_mid, k2);
    for (std::size_t i = 0; i < N; ++i) {
        out.phi_m[i] = state.phi_m[i] + 0.5 * dt * (k1.dphi[i] + k2.dphi[i]);
        out.psi[i] = state.psi[i] + 0.5 * dt * (k1.dpsi[i] + k2.dpsi[i]);
    }
    flowdetail::check_positive(out.psi, out.time);

    // forward potential step (consistent short-span form of the coupled
    // equation); the reverse-time pass in run_flow supersedes this for
    // full trajectories
    flowdetail::SliceGeometry geo;
    geo.compute(state);
    for (std::size_t i = 0; i < N; ++i) {
        const double df = config.alpha_rule == AlphaRule::none
                              ? -geo.lap_f[i] + geo.f_s[i] * geo.f_s[i] - geo.R[i]
                              : -geo.lap_f[i] + geo.f_s[i] * geo.f_s[i] - geo.R[i] + alpha;
        out.f[i] = state.f[i] + dt * df;
    }
    const double mass = flow_potential_mass(out);
    const double shift = std::log(mass / flow_potential_mass(state));
    for (auto& v : out.f) v += shift;
    out.norm_shift_applied = state.norm_shift_applied + shift;
    return out;
}

struct Trajectory {
    std::vector<FlowState> states;
    FlowConfig config;

    const FlowState& at(std::size_t i) const { return states[i]; }
    std::size_t size() const { return states.size(); }
};

namespace flowdetail {

struct MetricPath {
    std::vector<double> times;
    std::vector<std::vector<double>> phi, psi;  // per step
    std::shared_ptr<const RadialGrid> grid;
    int n = 2;
};

/// Forward integration of the plain metric flow storing every step.
inline MetricPath integrate_plain_metric(const FlowState& initial, double t_end,
                                         double dt_safety) {
    MetricPath path;
    path.grid = initial.grid;
    path.n = initial.n;
    FlowState s = initial;
    FlowConfig plain;
    plain.alpha_rule = AlphaRule::none;
    plain.dt_safety = dt_safety;
    path.times.push_back(s.time);
    path.phi.push_back(s.phi_m);
    path.psi.push_back(s.psi);
    while (s.time < t_end - 1e-15) {
        const double dt = std::min(stable_dt(s, plain), t_end - s.time);
        MetricRhs k1, k2;
        metric_rhs(s, 0.0, k1);
        FlowState mid = s;
        for (std::size_t i = 0; i < s.psi.size(); ++i) {
            mid.phi_m[i] += dt * k1.dphi[i];
            mid.psi[i] += dt * k1.dpsi[i];
        }
        check_positive(mid.psi, s.time);
        metric_rhs(mid, 0.0, k2);
        for (std::size_t i = 0; i < s.psi.size(); ++i) {
            s.phi_m[i] += 0.5 * dt * (k1.dphi[i] + k2.dphi[i]);
            s.psi[i] += 0.5 * dt * (k1.dpsi[i] + k2.dpsi[i]);
        }
        check_positive(s.psi, s.time);
        s.time += dt;
        path.times.push_back(s.time);
        path.phi.push_back(s.phi_m);
        path.psi.push_back(s.psi);
    }
    return path;
}

/**
 * Reverse-time conjugate pass: u = e^{-f} solves d_t u = -Lap u + R u along
 * the flow, which is forward-parabolic when integrated from the final slice
 * backwards. Final data: the uniform density. Returns f per stored step.
 */
inline std::vector<std::vector<double>> conjugate_potential_pass(const MetricPath& path) {
    const std::size_t steps = path.times.size();
    const std::size_t N = path.grid->size();
    const int m = path.n - 1;
    std::vector<std::vector<double>> f(steps);
    FlowState slice;
    slice.n = path.n;
    slice.round = false;
    slice.grid = path.grid;

    // final data: f_T = log vol(g_T), i.e. uniform u
    slice.phi_m = path.phi.back();
    slice.psi = path.psi.back();
    slice.f.assign(N, 0.0);
    double volT = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        volT += path.grid->weight(i) * std::pow(slice.psi[i], m) * slice.phi_m[i];
    volT *= sphere_volume(m);
    std::vector<double> u(N, 1.0 / volT);

    SliceGeometry geo;
    ParityDeriv deven{path.grid->spacing(0), 1, 1};
    std::vector<double> u_x, u_xx, phi_x, rhs1(N), utmp(N);
    auto conj_rhs = [&](const std::vector<double>& uu, const FlowState& sl,
                        std::vector<double>& out) {
        geo.compute(sl, false);
        deven.d1(uu, u_x);
        deven.d2(uu, u_xx);
        deven.d1(sl.phi_m, phi_x);
        for (std::size_t i = 0; i < N; ++i) {
            const double ph = sl.phi_m[i];
            const double u_s = u_x[i] / ph;
            const double u_ss = (u_xx[i] - u_x[i] * phi_x[i] / ph) / (ph * ph);
            double lap;
            if (i == 0 || i + 1 == N) {
                lap = (1.0 + m) * u_ss;
            } else {
                lap = u_ss + m * (geo.psi_s[i] / sl.psi[i]) * u_s;
            }
            // d_s u = +Lap u - R u with s = T - t
            out[i] = lap - geo.R[i] * uu[i];
        }
    };

    for (std::size_t k = steps; k-- > 0;) {
        slice.phi_m = path.phi[k];
        slice.psi = path.psi[k];
        f[k].resize(N);
        for (std::size_t i = 0; i < N; ++i)
            f[k][i] = -std::log(std::max(u[i], 1e-300));
        if (k == 0) break;
        const double dt = path.times[k] - path.times[k - 1];
        // Heun step backwards (metric held at the later slice for the
        // predictor, the earlier for the corrector)
        conj_rhs(u, slice, rhs1);
        for (std::size_t i = 0; i < N; ++i) utmp[i] = u[i] + dt * rhs1[i];
        FlowState earlier = slice;
        earlier.phi_m = path.phi[k - 1];
        earlier.psi = path.psi[k - 1];
        std::vector<double> rhs2(N);
        conj_rhs(utmp, earlier, rhs2);
        for (std::size_t i = 0; i < N; ++i)
            u[i] = std::max(u[i] + 0.5 * dt * (rhs1[i] + rhs2[i]), 1e-300);
    }
    return f;
}

} // namespace flowdetail

/**
 * Integrate from `initial` to config.t_end, keeping ~sample_count states.
 *
 * Plain flow on profiles: the metric path runs forward (stable) and the
 * potential comes from the reverse-time conjugate pass, so the pair
 * satisfies the coupled system without the forward instability. The
 * renormalized rules are realized exactly as scaled time-reparametrizations
 * of the plain path (sigma' = 2 alpha sigma / n, rho' = 1/sigma), which is
 * the same geometry as the Hess-f system modulo its gauge diffeomorphism;
 * the potential transports as f(rho) + (n/2) log sigma.
 */
inline Trajectory run_flow(const FlowState& initial, FlowConfig config) {
    config.validate();
    Trajectory traj;
    traj.config = config;

    if (initial.round) {
        FlowState s = initial;
        traj.states.push_back(s);
        if (config.alpha_rule == AlphaRule::shrinking_time_preserving &&
            config.fixed_alpha == 0.0) {
            config.fixed_alpha = initial.n / (2.0 * shrinking_time_estimate(initial));
            traj.config = config;
        }
        const std::size_t K = std::max<std::size_t>(config.sample_count, 2);
        for (std::size_t j = 1; j <= K; ++j) {
            const double target = initial.time + config.t_end * double(j) / double(K);
            s = flow_step(s, config, target - s.time);
            traj.states.push_back(s);
        }
        return traj;
    }

    if (config.alpha_rule == AlphaRule::shrinking_time_preserving &&
        config.fixed_alpha == 0.0) {
        config.fixed_alpha = initial.n / (2.0 * shrinking_time_estimate(initial));
        traj.config = config;
    }

    const std::size_t samples = std::max<std::size_t>(config.sample_count, 2);
    const int n = initial.n;

    if (config.alpha_rule == AlphaRule::none) {
        flowdetail::MetricPath path =
            flowdetail::integrate_plain_metric(initial, initial.time + config.t_end,
                                               config.dt_safety);
        const auto f = flowdetail::conjugate_potential_pass(path);
        const double t0 = path.times.front();
        const double span = path.times.back() - t0;
        std::size_t k = 0;
        for (std::size_t j = 0; j <= samples; ++j) {
            const double target = t0 + span * double(j) / double(samples);
            while (k + 1 < path.times.size() && path.times[k] < target - 1e-15) ++k;
            FlowState s = initial;
            s.time = path.times[k];
            s.phi_m = path.phi[k];
            s.psi = path.psi[k];
            s.f = f[k];
            traj.states.push_back(std::move(s));
        }
        return traj;
    }

    // Renormalized rules: scaled reparametrization of the plain path with
    // sigma a closed function of the plain time rho:
    //   fixed alpha:        sigma = 1 / (1 - 2 alpha rho / n),
    //   volume preserving:  sigma = (vol0 / vol_plain(rho))^{2/n},
    // and the renormalized time accumulated by dt_hat = sigma d rho.
    flowdetail::MetricPath path;
    path.grid = initial.grid;
    path.n = n;
    std::vector<double> that;  // renormalized time per stored step
    {
        FlowState s0 = initial;
        FlowConfig plaincfg;
        plaincfg.alpha_rule = AlphaRule::none;
        plaincfg.dt_safety = config.dt_safety;
        const double vol0 = flow_volume(s0);
        auto sigma_of = [&](const FlowState& st, double rho) {
            if (config.alpha_rule == AlphaRule::volume_preserving)
                return std::pow(vol0 / flow_volume(st), 2.0 / double(n));
            const double denom = 1.0 - 2.0 * config.fixed_alpha * rho / double(n);
            if (!(denom > 0.0))
                throw error("flow_singular", "renormalization scale blew up");
            return 1.0 / denom;
        };
        path.times.push_back(s0.time);
        path.phi.push_back(s0.phi_m);
        path.psi.push_back(s0.psi);
        that.push_back(0.0);
        double sig_prev = sigma_of(s0, 0.0);
        while (that.back() < config.t_end - 1e-15) {
            const double dt = stable_dt(s0, plaincfg);
            flowdetail::MetricRhs k1, k2;
            flowdetail::metric_rhs(s0, 0.0, k1);
            FlowState mid = s0;
            for (std::size_t i = 0; i < mid.psi.size(); ++i) {
                mid.phi_m[i] += dt * k1.dphi[i];
                mid.psi[i] += dt * k1.dpsi[i];
            }
            flowdetail::check_positive(mid.psi, s0.time);
            flowdetail::metric_rhs(mid, 0.0, k2);
            for (std::size_t i = 0; i < s0.psi.size(); ++i) {
                s0.phi_m[i] += 0.5 * dt * (k1.dphi[i] + k2.dphi[i]);
                s0.psi[i] += 0.5 * dt * (k1.dpsi[i] + k2.dpsi[i]);
            }
            flowdetail::check_positive(s0.psi, s0.time);
            s0.time += dt;
            const double rho = s0.time - initial.time;
            const double sig = sigma_of(s0, rho);
            path.times.push_back(s0.time);
            path.phi.push_back(s0.phi_m);
            path.psi.push_back(s0.psi);
            that.push_back(that.back() + 0.5 * dt * (sig_prev + sig));
            sig_prev = sig;
        }
        const auto f = flowdetail::conjugate_potential_pass(path);
        const double vol00 = vol0;
        std::size_t k = 0;
        for (std::size_t j = 0; j <= samples; ++j) {
            const double target = config.t_end * double(j) / double(samples);
            while (k + 1 < that.size() && that[k] < target - 1e-15) ++k;
            FlowState st = initial;
            st.time = initial.time + that[k];
            st.phi_m = path.phi[k];
            st.psi = path.psi[k];
            st.f = f[k];
            const double rho = path.times[k] - initial.time;
            double sig;
            if (config.alpha_rule == AlphaRule::volume_preserving) {
                double volk = 0.0;
                const int m = n - 1;
                for (std::size_t i = 0; i < st.psi.size(); ++i)
                    volk += st.grid->weight(i) * std::pow(st.psi[i], m) * st.phi_m[i];
                volk *= sphere_volume(m);
                sig = std::pow(vol00 / volk, 2.0 / double(n));
            } else {
                sig = 1.0 / (1.0 - 2.0 * config.fixed_alpha * rho / double(n));
            }
            const double root = std::sqrt(sig);
            for (auto& v : st.phi_m) v *= root;
            for (auto& v : st.psi) v *= root;
            for (auto& v : st.f) v += 0.5 * n * std::log(sig);
            traj.states.push_back(std::move(st));
        }
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Monitors
// ---------------------------------------------------------------------------

struct MonitorRecord {
    double time = 0.0;
    double sup_rm_times_t = 0.0;
    double volume = 0.0;
    double F_value = 0.0;
    double W_value = 0.0;
    std::map<std::string, double> residuals;
};

inline MonitorRecord monitor_state(const FlowState& s, double tau_for_w) {
    MonitorRecord rec;
    rec.time = s.time;
    rec.volume = flow_volume(s);
    rec.F_value = flow_f_functional(s);
    rec.W_value = tau_for_w > 0.0 ? flow_w_functional(s, tau_for_w) : 0.0;
    rec.sup_rm_times_t = flow_sup_rm(s) * s.time;
    return rec;
}

struct VariationReport {
    double max_vol_residual = 0.0;   // relative
    double max_F_residual = 0.0;
    double max_W_residual = 0.0;
    double max_R_residual = 0.0;
    bool F_monotone = true;
    double monotone_slack = 1e-5;
};

namespace flowdetail {

/// 2 Int <Ric + Hess f - (alpha/n) g, Ric + Hess f - (gamma/2) g> dmeasure,
/// with the measure e^{-phi} dv (gamma = 0) or u^2 dv (gamma = 1/tau).
inline double soliton_pairing(const FlowState& s, double alpha, double gamma,
                              double tau_measure) {
    const int n = s.n, m = n - 1;
    if (s.round) {
        const double ric = m / s.beta_sq;
        const double a = ric - alpha / n, b = ric - 0.5 * gamma;
        return 2.0 * n * a * b;
    }
    SliceGeometry geo;
    geo.compute(s);
    (void)tau_measure;  // both pairings use the unit-mass e^{-phi} measure
    const double shift = std::log(flow_potential_mass(s));
    double total = 0.0;
    for (std::size_t i = 0; i < s.psi.size(); ++i) {
        const double ric_ss = m * geo.k_rad[i];
        const double ric_fib = geo.k_rad[i] + (m - 1.0) * geo.k_sph[i];
        const double a_ss = ric_ss + geo.f_ss[i];
        const double a_fib = ric_fib + geo.hess_fib[i];
        const double w = s.grid->weight(i) * std::pow(s.psi[i], m) * s.phi_m[i] *
                         sphere_volume(m) * std::exp(-(s.f[i] + shift));
        total += w * ((a_ss - alpha / n) * (a_ss - 0.5 * gamma) +
                      m * (a_fib - alpha / n) * (a_fib - 0.5 * gamma));
    }
    return 2.0 * total;
}

} // namespace flowdetail

/**
 * Finite-difference time derivatives of vol, F, W(tau fixed) and pointwise R
 * against the variation identities evaluated from the states; also flags
 * F monotonicity (plain flow).
 */
inline VariationReport variation_identities_check(const Trajectory& traj,
                                                  double tau_fixed = 0.0) {
    if (traj.size() < 100)
        throw error("insufficient_sampling", "variation check needs >= 100 states");
    VariationReport rep;
    const bool plain = traj.config.alpha_rule == AlphaRule::none;
    for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
        const FlowState& a = traj.at(i - 1);
        const FlowState& b = traj.at(i);
        const FlowState& c = traj.at(i + 1);
        const double dt = c.time - a.time;
        if (dt <= 0.0) continue;
        const double alpha = resolve_alpha(b, traj.config);

        const double dvol = (flow_volume(c) - flow_volume(a)) / dt;
        const double vol_rhs = (alpha - flow_r_average(b)) * flow_volume(b);
        rep.max_vol_residual =
            std::max(rep.max_vol_residual, std::abs(dvol - vol_rhs) / flow_volume(b));

        const double Fa = flow_f_functional(a), Fc = flow_f_functional(c);
        const double dF = (Fc - Fa) / dt;
        const double F_rhs = flowdetail::soliton_pairing(b, plain ? 0.0 : alpha, 0.0, 0.0);
        rep.max_F_residual = std::max(rep.max_F_residual, std::abs(dF - F_rhs));
        if (plain && Fc - Fa < -rep.monotone_slack) rep.F_monotone = false;

        if (tau_fixed > 0.0) {
            const double dW =
                (flow_w_functional(c, tau_fixed) - flow_w_functional(a, tau_fixed)) / dt;
            const double W_rhs =
                tau_fixed * flowdetail::soliton_pairing(b, plain ? 0.0 : alpha,
                                                        1.0 / tau_fixed, tau_fixed);
            rep.max_W_residual = std::max(rep.max_W_residual, std::abs(dW - W_rhs));
        }
    }
    // pointwise R residual on a subsample
    for (std::size_t i = 1; i + 1 < traj.size(); i += 8) {
        const FlowState& a = traj.at(i - 1);
        const FlowState& b = traj.at(i);
        const FlowState& c = traj.at(i + 1);
        const double dt = c.time - a.time;
        const double alpha = resolve_alpha(b, traj.config);
        if (b.round) {
            const int n = b.n;
            const double Ra = n * (n - 1.0) / a.beta_sq, Rc = n * (n - 1.0) / c.beta_sq;
            const double dR = (Rc - Ra) / dt;
            const double ric = (n - 1.0) / b.beta_sq;
            const double rhs =
                2.0 * n * ric * ric - 2.0 * alpha / n * (n * (n - 1.0) / b.beta_sq);
            rep.max_R_residual = std::max(rep.max_R_residual, std::abs(dR - rhs));
            continue;
        }
        flowdetail::SliceGeometry ga, gb, gc;
        ga.compute(a, false);
        gb.compute(b, plain ? false : true);
        gc.compute(c, false);
        const std::size_t N = b.psi.size();
        const double h = b.grid->spacing(0);
        flowdetail::ParityDeriv deven{h, 1, 1};
        std::vector<double> R_x, R_xx, phi_x;
        deven.d1(gb.R, R_x);
        deven.d2(gb.R, R_xx);
        deven.d1(b.phi_m, phi_x);
        const int m = b.n - 1;
        for (std::size_t k = 4; k + 4 < N; k += 5) {
            const double ph = b.phi_m[k];
            const double R_s = R_x[k] / ph;
            const double R_ss = (R_xx[k] - R_x[k] * phi_x[k] / ph) / (ph * ph);
            const double lapR = R_ss + m * (gb.psi_s[k] / b.psi[k]) * R_s;
            const double ric_sq = std::pow(m * gb.k_rad[k], 2) +
                                  m * std::pow(gb.k_rad[k] + (m - 1.0) * gb.k_sph[k], 2);
            // the trajectory realizes the gauge-free renormalized system, so
            // the drift term of the gauged identity is absent here
            double rhs = lapR + 2.0 * ric_sq;
            if (!plain) rhs += -2.0 * alpha / b.n * gb.R[k];
            const double dR = (gc.R[k] - ga.R[k]) / dt;
            rep.max_R_residual = std::max(rep.max_R_residual, std::abs(dR - rhs));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Shrinking time
// ---------------------------------------------------------------------------

/**
 * Time to extinction of the plain Ricci flow started at `state`: exact for
 * round inputs, otherwise integrated until the slice is round within the
 * threshold and extrapolated by the least-squares zero crossing of the
 * volume-radius beta_eff^2(t).
 */
inline double shrinking_time_estimate(const FlowState& state, double roundness_threshold) {
    const int n = state.n;
    if (state.round) return state.beta_sq / (2.0 * (n - 1));
    FlowConfig plain;
    plain.alpha_rule = AlphaRule::none;
    FlowState s = state;
    s.time = 0.0;
    s.f.assign(state.psi.size(), 0.0);
    const double init_beta_sq =
        std::pow(flow_volume(s) / sphere_volume(n), 2.0 / double(n));
    std::vector<std::pair<double, double>> tail;
    int guard = 0;
    while (true) {
        if (++guard > 4000000) throw error("no_round_limit", "flow failed to round out");
        const double beta_eff_sq =
            std::pow(flow_volume(s) / sphere_volume(n), 2.0 / double(n));
        if (roundness_metric(s) < roundness_threshold) tail.emplace_back(s.time, beta_eff_sq);
        if (!tail.empty() && beta_eff_sq < 0.35 * tail.front().second) break;
        if (tail.empty() && beta_eff_sq < 0.05 * init_beta_sq)
            throw error("no_round_limit", "slice shrank without rounding out");
        flowdetail::MetricRhs k1, k2;
        flowdetail::metric_rhs(s, 0.0, k1);
        const double dt = stable_dt(s, plain);
        FlowState mid = s;
        for (std::size_t i = 0; i < s.psi.size(); ++i) {
            mid.phi_m[i] += dt * k1.dphi[i];
            mid.psi[i] += dt * k1.dpsi[i];
        }
        try {
            flowdetail::check_positive(mid.psi, s.time);
            flowdetail::metric_rhs(mid, 0.0, k2);
            for (std::size_t i = 0; i < s.psi.size(); ++i) {
                s.phi_m[i] += 0.5 * dt * (k1.dphi[i] + k2.dphi[i]);
                s.psi[i] += 0.5 * dt * (k1.dpsi[i] + k2.dpsi[i]);
            }
            flowdetail::check_positive(s.psi, s.time);
        } catch (const error& e) {
            if (std::string(e.code()) == "flow_singular")
                throw error("no_round_limit", "flow degenerated before rounding out");
            throw;
        }
        s.time += dt;
    }
    const std::size_t k0 = tail.size() / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double cnt = double(tail.size() - k0);
    for (std::size_t i = k0; i < tail.size(); ++i) {
        sx += tail[i].first;
        sy += tail[i].second;
        sxx += tail[i].first * tail[i].first;
        sxy += tail[i].first * tail[i].second;
    }
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    const double inter = (sy - slope * sx) / cnt;
    if (!(slope < 0.0)) throw error("no_round_limit", "round part is not shrinking");
    return -inter / slope;
}

struct ShrinkingTimeDriftReport {
    std::vector<double> sample_times;
    std::vector<double> estimates;
    double max_relative_drift = 0.0;
};

/// Integrates the configured renormalized flow and re-estimates the
/// shrinking time at 5 sample times.
inline ShrinkingTimeDriftReport renormalized_shrinking_time_check(const FlowState& state,
                                                                  FlowConfig config) {
    const double T0 = shrinking_time_estimate(state);
    if (config.alpha_rule == AlphaRule::shrinking_time_preserving &&
        config.fixed_alpha == 0.0)
        config.fixed_alpha = state.n / (2.0 * T0);
    if (config.t_end <= 0.0) config.t_end = 2.0 * T0;
    config.sample_count = 4;
    Trajectory traj = run_flow(state, config);
    ShrinkingTimeDriftReport rep;
    for (const auto& s : traj.states) {
        const double Ti = shrinking_time_estimate(s);
        rep.sample_times.push_back(s.time);
        rep.estimates.push_back(Ti);
        rep.max_relative_drift = std::max(rep.max_relative_drift, std::abs(Ti - T0) / T0);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Type III, blowdown, volume ratio
// ---------------------------------------------------------------------------

struct TypeIIIResult {
    double C_estimate = 0.0;
    bool is_type_iii = true;
};

/// C = sup over the trajectory of sup|Rm| * t; type III unless the last
/// quartile shows a monotone blow-up trend.
inline TypeIIIResult type_iii_monitor(const Trajectory& traj) {
    TypeIIIResult res;
    std::vector<double> curve;
    for (const auto& s : traj.states) {
        if (s.time <= 0.0) continue;
        curve.push_back(flow_sup_rm(s) * s.time);
        res.C_estimate = std::max(res.C_estimate, curve.back());
    }
    if (curve.size() < 8) return res;
    const std::size_t q = curve.size() - curve.size() / 4;
    bool monotone = true;
    for (std::size_t i = q + 1; i < curve.size(); ++i)
        if (curve[i] <= curve[i - 1]) monotone = false;
    const double growth = curve[q] > 0.0 ? curve.back() / curve[q] : 1.0;
    res.is_type_iii = !(monotone && growth > 1.2 && curve.back() > 1e-9);
    return res;
}

/// Parabolic rescaling g_s(t) = (1/s) g(st), exact on the sampled states.
inline Trajectory blowdown_rescale(const Trajectory& traj, double s,
                                   double required_horizon = -1.0) {
    if (!(s > 0.0)) throw error("bad_query", "rescale factor must be positive");
    if (required_horizon > 0.0 && traj.states.back().time < s * required_horizon - 1e-12)
        throw error("trajectory_too_short", "trajectory does not cover s * t_max");
    Trajectory out;
    out.config = traj.config;
    const double inv_sqrt = 1.0 / std::sqrt(s);
    for (FlowState st : traj.states) {
        st.time /= s;
        if (st.round) {
            st.beta_sq /= s;
            st.f_round = std::log(std::pow(st.beta_sq, 0.5 * st.n) * sphere_volume(st.n));
        } else {
            for (auto& v : st.psi) v *= inv_sqrt;
            for (auto& v : st.phi_m) v *= inv_sqrt;
            for (auto& v : st.f) v -= 0.5 * st.n * std::log(s);
        }
        out.states.push_back(std::move(st));
    }
    return out;
}

struct VolumeRatioTrace {
    std::vector<double> time;
    std::vector<double> ratio;  // Vol(B(p, sqrt t)) / t^{n/2}
    bool collapse_flag = false;
};

/// Geodesic-ball volume ratio from the basepoint (a coordinate on the
/// profile grid; round states measure from a pole).
inline VolumeRatioTrace volume_ratio_monitor(const Trajectory& traj, double basepoint_xi) {
    VolumeRatioTrace trace;
    for (const auto& s : traj.states) {
        if (s.time <= 0.0) continue;
        const double radius = std::sqrt(s.time);
        const int n = s.n, m = n - 1;
        double vol = 0.0;
        if (s.round) {
            const double beta = std::sqrt(s.beta_sq);
            const double theta = std::min(radius / beta, pi);
            const std::size_t K = 1024;
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double x = (k + 0.5) * theta / double(K);
                acc += std::pow(std::sin(x), m) * theta / double(K);
            }
            vol = sphere_volume(m) * std::pow(beta, n) * acc;
        } else {
            if (basepoint_xi < s.grid->nodes().front() ||
                basepoint_xi > s.grid->nodes().back())
                throw error("bad_basepoint", "basepoint outside the profile grid");
            const std::size_t N = s.psi.size();
            std::vector<double> arc(N, 0.0);
            const double h = s.grid->spacing(0);
            std::size_t i0 = 0;
            for (std::size_t i = 0; i < N; ++i)
                if (std::abs(s.grid->node(i) - basepoint_xi) <
                    std::abs(s.grid->node(i0) - basepoint_xi))
                    i0 = i;
            for (std::size_t i = i0 + 1; i < N; ++i)
                arc[i] = arc[i - 1] + 0.5 * h * (s.phi_m[i - 1] + s.phi_m[i]);
            for (std::size_t i = i0; i-- > 0;)
                arc[i] = arc[i + 1] + 0.5 * h * (s.phi_m[i + 1] + s.phi_m[i]);
            // per-cell trapezoid with a fractional last cell, exact on
            // linear integrands (the flat disk's trace is then constant
            // to round-off)
            auto cell = [&](std::size_t i, std::size_t j) {
                const double fi = std::pow(s.psi[i], m) * s.phi_m[i];
                const double fj = std::pow(s.psi[j], m) * s.phi_m[j];
                if (arc[j] <= radius) return 0.5 * h * (fi + fj);
                const double t = (radius - arc[i]) / (arc[j] - arc[i]);
                if (t <= 0.0) return 0.0;
                const double fmid = fi + t * (fj - fi);
                return 0.5 * t * h * (fi + fmid);
            };
            for (std::size_t i = i0; i + 1 < N && arc[i] < radius; ++i)
                vol += cell(i, i + 1);
            for (std::size_t i = i0; i > 0 && arc[i] < radius; --i)
                vol += cell(i, i - 1);
            vol *= sphere_volume(m);
        }
        trace.time.push_back(s.time);
        trace.ratio.push_back(vol / std::pow(s.time, 0.5 * n));
    }
    if (trace.ratio.size() >= 2 && trace.ratio.back() < 0.05 * trace.ratio.front())
        trace.collapse_flag = true;
    return trace;
}

/// Analytic round trajectory beta^2(t) = beta0^2 + sign 2 (n-1) t at the
/// given times (sign -1: shrinking, +1: expanding).
inline Trajectory make_round_trajectory(int n, double beta0, const std::vector<double>& times,
                                        double sign = -1.0) {
    Trajectory traj;
    traj.config.alpha_rule = AlphaRule::none;
    for (double t : times) {
        FlowState s;
        s.time = t;
        s.n = n;
        s.round = true;
        s.beta_sq = beta0 * beta0 + sign * 2.0 * (n - 1) * t;
        if (s.beta_sq <= 0.0) throw error("past_extinction", "trajectory past extinction");
        s.f_round = std::log(std::pow(s.beta_sq, 0.5 * n) * sphere_volume(n));
        traj.states.push_back(std::move(s));
    }
    return traj;
}

/// Static flat-disk trajectory (psi = xi): the Euclidean reference for the
/// volume-ratio monitor.
inline Trajectory make_static_flat_trajectory(int n, double extent,
                                              const std::vector<double>& times,
                                              std::size_t nodes = 512) {
    auto grid = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, extent, nodes));
    FlowState base;
    base.n = n;
    base.round = false;
    base.grid = grid;
    base.psi.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) base.psi[i] = grid->node(i);
    base.phi_m.assign(nodes, 1.0);
    base.f.assign(nodes, 0.0);
    base.open_right = true;
    Trajectory traj;
    traj.config.alpha_rule = AlphaRule::none;
    for (double t : times) {
        FlowState s = base;
        s.time = t;
        traj.states.push_back(std::move(s));
    }
    return traj;
}

} // namespace conelab
