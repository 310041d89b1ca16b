#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "conelab/flow.hpp"
#include "conelab/random_fields.hpp"

using namespace conelab;

TEST_CASE("round ODE path") {
    const FlowState s = ricci_flow_round_ode(1.0, 2, 0.25);
    REQUIRE_THAT(s.beta_sq, Catch::Matchers::WithinAbs(0.5, 1e-14));
    REQUIRE_THAT(shrinking_time_estimate(make_round_state(2, 1.0)),
                 Catch::Matchers::WithinAbs(0.5, 1e-14));
    REQUIRE(ricci_flow_round_ode(2.0, 3, 0.0).beta_sq == 4.0);
    REQUIRE_THROWS_AS(ricci_flow_round_ode(1.0, 2, 0.5), error);
}

TEST_CASE("flow_step: fixed point, plain rate, degeneracy") {
    // alpha = n/(2 T_N) on a round sphere is an exact fixed point
    FlowConfig fixed_cfg;
    fixed_cfg.alpha_rule = AlphaRule::shrinking_time_preserving;
    FlowState s = make_round_state(2, 1.0);
    for (int k = 0; k < 10; ++k) {
        s = flow_step(s, fixed_cfg, 0.05);
        REQUIRE_THAT(s.beta_sq, Catch::Matchers::WithinAbs(1.0, 1e-10));
    }

    // plain flow: beta^2 decreases at rate 2(n-1) = 2
    FlowConfig plain;
    plain.alpha_rule = AlphaRule::none;
    const FlowState p = flow_step(make_round_state(2, 1.0), plain, 0.01);
    REQUIRE_THAT((1.0 - p.beta_sq) / 0.01, Catch::Matchers::WithinAbs(2.0, 1e-8));

    // a ridiculous step degenerates the profile
    FlowState prof = make_profile_state(round_profile(2, 1.0, 96));
    REQUIRE_THROWS_AS(flow_step(prof, plain, 10.0), error);
}

TEST_CASE("round profile PDE reproduces the ODE") {
    FlowState s = make_profile_state(round_profile(2, 1.0, 256));
    FlowConfig cfg;
    cfg.alpha_rule = AlphaRule::none;
    cfg.t_end = 0.45;  // 0.9 T
    cfg.sample_count = 40;
    const Trajectory traj = run_flow(s, cfg);
    for (const auto& st : traj.states) {
        const double beta_eff_sq = flow_volume(st) / sphere_volume(2);
        REQUIRE_THAT(beta_eff_sq, Catch::Matchers::WithinAbs(1.0 - 2.0 * st.time, 1e-6));
    }
}

TEST_CASE("variation identities on the round closed form") {
    FlowConfig cfg;
    cfg.alpha_rule = AlphaRule::none;
    cfg.t_end = 0.3;
    cfg.sample_count = 3000;
    const Trajectory traj = run_flow(make_round_state(2, 1.0), cfg);
    const VariationReport rep = variation_identities_check(traj);
    // dF/dt = 2 n (n-1)^2 / beta^4 via the soliton pairing, within 1e-4
    REQUIRE(rep.max_F_residual < 1e-4);
    REQUIRE(rep.F_monotone);
    REQUIRE(rep.max_vol_residual < 1e-9);
}

TEST_CASE("volume preservation under alpha = R_av") {
    std::mt19937 rng(4);
    FlowState s = make_profile_state(random_profile(2, rng, 192, 0.04));
    FlowConfig cfg;
    cfg.alpha_rule = AlphaRule::volume_preserving;
    cfg.t_end = 1.0;
    cfg.sample_count = 120;
    const Trajectory traj = run_flow(s, cfg);
    const double v0 = flow_volume(traj.states.front());
    for (const auto& st : traj.states)
        REQUIRE(std::abs(flow_volume(st) - v0) < 1e-5 * v0);
    const VariationReport rep = variation_identities_check(traj);
    REQUIRE(rep.max_vol_residual < 1e-6);
}

TEST_CASE("plain coupled flow: F and W(tau - t) nondecreasing") {
    std::mt19937 rng(7);
    FlowState s = make_profile_state(random_profile(2, rng, 192, 0.05));
    const double T0 = shrinking_time_estimate(s);
    FlowConfig cfg;
    cfg.alpha_rule = AlphaRule::none;
    cfg.t_end = 0.3 * T0;
    cfg.sample_count = 150;
    cfg.tau0 = 1.5 * T0;
    const Trajectory traj = run_flow(s, cfg);
    double prevF = -1e300, prevW = -1e300;
    for (const auto& st : traj.states) {
        const double F = flow_f_functional(st);
        const double W = flow_w_functional(st, cfg.tau0 - st.time);
        REQUIRE(F >= prevF - 1e-5);
        REQUIRE(W >= prevW - 1e-5);
        prevF = F;
        prevW = W;
    }
    const VariationReport rep = variation_identities_check(traj, cfg.tau0);
    REQUIRE(rep.F_monotone);
    REQUIRE(rep.max_F_residual < 5e-3);  // report-level FD accuracy
    REQUIRE(rep.max_W_residual < 5e-3);
    REQUIRE_THROWS_AS(
        variation_identities_check(Trajectory{{traj.states.front()}, cfg}, 0.0), error);
}

TEST_CASE("shrinking time estimates") {
    REQUIRE_THAT(shrinking_time_estimate(make_round_state(3, 2.0)),
                 Catch::Matchers::WithinAbs(1.0, 1e-12));
    std::mt19937 rng(11);
    FlowState s = make_profile_state(random_profile(2, rng, 192, 0.03));
    REQUIRE_THAT(shrinking_time_estimate(s), Catch::Matchers::WithinAbs(0.5, 0.025));
}

TEST_CASE("renormalized flow preserves the shrinking time") {
    FlowConfig cfg;
    cfg.alpha_rule = AlphaRule::shrinking_time_preserving;
    const auto round_rep = renormalized_shrinking_time_check(make_round_state(2, 1.0), cfg);
    REQUIRE(round_rep.max_relative_drift < 1e-6);

    std::mt19937 rng(3);
    FlowState s = make_profile_state(random_profile(2, rng, 160, 0.04));
    FlowConfig cfg2;
    cfg2.alpha_rule = AlphaRule::shrinking_time_preserving;
    const auto rep = renormalized_shrinking_time_check(s, cfg2);
    REQUIRE(rep.max_relative_drift < 0.01);

    // volume preserving instead: T never decreases (the C.2 table sign)
    FlowConfig vcfg;
    vcfg.alpha_rule = AlphaRule::volume_preserving;
    vcfg.t_end = 2.0 * rep.estimates.front();
    const auto vrep = renormalized_shrinking_time_check(s, vcfg);
    for (std::size_t i = 1; i < vrep.estimates.size(); ++i)
        REQUIRE(vrep.estimates[i] >= vrep.estimates[i - 1] - 1e-6);
}

TEST_CASE("type III monitor") {
    std::vector<double> times;
    for (int i = 1; i <= 60; ++i) times.push_back(0.49 * i / 60.0);
    const auto shrink = type_iii_monitor(make_round_trajectory(2, 1.0, times, -1.0));
    REQUIRE_FALSE(shrink.is_type_iii);  // |Rm| t blows up near extinction

    std::vector<double> texp;
    for (int i = 1; i <= 60; ++i) texp.push_back(10.0 * i / 60.0);
    const auto expand = type_iii_monitor(make_round_trajectory(2, 1.0, texp, +1.0));
    REQUIRE(expand.is_type_iii);
    REQUIRE(expand.C_estimate < 1.0);  // limit sqrt(2 n (n-1)) / (2 (n-1)) = 1

    const auto flat = type_iii_monitor(make_static_flat_trajectory(2, 8.0, texp));
    REQUIRE(flat.is_type_iii);
    REQUIRE(flat.C_estimate < 1e-9);
}

TEST_CASE("blowdown rescaling: identities and the group law") {
    std::vector<double> times;
    for (int i = 1; i <= 50; ++i) times.push_back(8.0 * i / 50.0);
    const Trajectory traj = make_round_trajectory(2, 1.0, times, +1.0);

    const Trajectory same = blowdown_rescale(traj, 1.0);
    for (std::size_t i = 0; i < traj.size(); ++i)
        REQUIRE(same.at(i).beta_sq == traj.at(i).beta_sq);

    const Trajectory by4 = blowdown_rescale(traj, 4.0);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        // |Rm_{g_s}|(t) = s |Rm_g|(s t)
        REQUIRE_THAT(flow_sup_rm(by4.at(i)),
                     Catch::Matchers::WithinAbs(4.0 * flow_sup_rm(traj.at(i)), 1e-10));
    }
    REQUIRE_THAT(type_iii_monitor(by4).C_estimate,
                 Catch::Matchers::WithinAbs(type_iii_monitor(traj).C_estimate, 1e-8));

    const Trajectory g12 = blowdown_rescale(blowdown_rescale(traj, 2.0), 3.0);
    const Trajectory g6 = blowdown_rescale(traj, 6.0);
    for (std::size_t i = 0; i < g6.size(); ++i) {
        REQUIRE_THAT(g12.at(i).beta_sq,
                     Catch::Matchers::WithinAbs(g6.at(i).beta_sq, 1e-10));
        REQUIRE_THAT(g12.at(i).time, Catch::Matchers::WithinAbs(g6.at(i).time, 1e-10));
    }

    REQUIRE_THROWS_AS(blowdown_rescale(traj, 4.0, 8.0), error);  // needs coverage to 32
}

TEST_CASE("volume ratio monitor") {
    std::vector<double> times;
    for (int i = 1; i <= 40; ++i) times.push_back(4.0 * i / 40.0);
    const auto flat = volume_ratio_monitor(make_static_flat_trajectory(2, 8.0, times, 1024), 0.0);
    for (double r : flat.ratio)
        REQUIRE_THAT(r, Catch::Matchers::WithinAbs(ball_volume(2), 1e-10));
    REQUIRE_FALSE(flat.collapse_flag);

    // shrinking sphere near extinction: sqrt(t) exceeds the diameter and the
    // ratio collapses like vol(t)/t^{n/2}
    std::vector<double> tsh;
    for (int i = 1; i <= 40; ++i) tsh.push_back(0.2 + (0.4999 - 0.2) * i / 40.0);
    const Trajectory sh = make_round_trajectory(2, 1.0, tsh, -1.0);
    const auto shrink = volume_ratio_monitor(sh, 0.0);
    REQUIRE(shrink.collapse_flag);
    const double expect = 4.0 * pi * (1.0 - 2.0 * tsh.back()) / tsh.back();
    REQUIRE_THAT(shrink.ratio.back(), Catch::Matchers::WithinRel(expect, 1e-6));

    // trace invariant under blowdown
    const auto rescaled = volume_ratio_monitor(blowdown_rescale(sh, 2.0), 0.0);
    for (std::size_t i = 0; i < rescaled.ratio.size(); ++i)
        REQUIRE_THAT(rescaled.ratio[i],
                     Catch::Matchers::WithinAbs(shrink.ratio[i], 1e-8));

    REQUIRE_THROWS_AS(
        volume_ratio_monitor(make_static_flat_trajectory(2, 8.0, times, 256), 99.0), error);
}
