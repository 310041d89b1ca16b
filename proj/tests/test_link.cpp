#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

#include "conelab/link.hpp"
#include "conelab/random_fields.hpp"

using namespace conelab;

TEST_CASE("scalar curvature of round and warped links") {
    const ScalarField r2 = scalar_curvature_link(LinkGeometry(RoundSphere{2, 1.0}), 256);
    for (double v : r2.values()) REQUIRE_THAT(v, Catch::Matchers::WithinAbs(2.0, 1e-12));

    const ScalarField r3b2 = scalar_curvature_link(LinkGeometry(RoundSphere{3, 2.0}), 256);
    for (double v : r3b2.values()) REQUIRE_THAT(v, Catch::Matchers::WithinAbs(1.5, 1e-12));

    // psi = sin on [0, pi] with n = 3 is the round unit S3 in polar form
    const ProfileWarped pw = round_profile(3, 1.0, 2048);
    const ScalarField R = profile_scalar_curvature(pw);
    for (std::size_t i = 8; i + 8 < R.size(); ++i)
        REQUIRE_THAT(R[i], Catch::Matchers::WithinAbs(6.0, 1e-4));
}

TEST_CASE("degenerate profile is rejected") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, pi, 128));
    std::vector<double> v(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) v[i] = std::sin(g->node(i)) - 0.5;
    v.front() = 0.0;
    v.back() = 0.0;
    ScalarField psi(g, v, BoundaryKind::pole_regular, BoundaryKind::pole_regular);
    REQUIRE_THROWS_AS(profile_scalar_curvature(ProfileWarped{2, psi, false}), error);
}

TEST_CASE("lambda of links") {
    REQUIRE_THAT(lambda_link(LinkGeometry(RoundSphere{2, 1.0}), 512),
                 Catch::Matchers::WithinAbs(2.0, 1e-6));
    // beta = 2 > sqrt(2): lambda = 0.5 below the n-1 = 1 threshold
    REQUIRE_THAT(lambda_link(LinkGeometry(RoundSphere{2, 2.0}), 512),
                 Catch::Matchers::WithinAbs(0.5, 1e-6));
    REQUIRE(lambda_link(LinkGeometry(EinsteinLink{3, 6.0, 2.0 * pi * pi, 0.25})) == 6.0);
}

TEST_CASE("lambda sits between R_min and R_av on random profiles") {
    std::mt19937 rng(42);
    for (int rep = 0; rep < 50; ++rep) {
        const ProfileWarped pw = random_profile(2, rng, 512, 0.08);
        const LinkGeometry link{pw};
        const LinkOperator op = link_operator(link, 512);
        const double lambda = lambda_link(link, 512);
        double rmin = 1e300;
        for (double v : op.R.values()) rmin = std::min(rmin, v);
        const double rav = integrate(op.R, op.m) / op.volume;
        REQUIRE(lambda >= rmin - 1e-6);
        REQUIRE(lambda <= rav + 1e-6);
    }
}

TEST_CASE("W functional on the unit sphere, and parabolic scaling") {
    const LinkGeometry s2{RoundSphere{2, 1.0}};
    const LinkOperator op = link_operator(s2, 1024);
    const auto form = detail::assemble_form(SturmLiouvilleProblem{op.m, op.p, op.R});
    const ScalarField u = detail::normalized_against(form, ScalarField::constant(op.grid, 1.0));

    REQUIRE_THAT(w_functional_link(op, u, {0.5, 2}),
                 Catch::Matchers::WithinAbs(std::log(2.0) - 1.0, 1e-6));
    REQUIRE_THAT(w_functional_link(op, u, {1.0, 2}), Catch::Matchers::WithinAbs(0.0, 1e-6));

    // joint rescale g -> beta^2 g, tau -> beta^2 tau leaves W invariant
    const double beta = 1.7;
    const LinkGeometry scaled = s2.rescaled(beta);
    const LinkOperator ops = link_operator(scaled, 1024);
    const auto forms = detail::assemble_form(SturmLiouvilleProblem{ops.m, ops.p, ops.R});
    const ScalarField us = detail::normalized_against(forms, ScalarField::constant(ops.grid, 1.0));
    REQUIRE_THAT(w_functional_link(ops, us, {beta * beta * 0.7, 2}),
                 Catch::Matchers::WithinAbs(w_functional_link(op, u, {0.7, 2}), 1e-8));

    REQUIRE_THROWS_AS(w_functional_link(op, ScalarField::constant(op.grid, 1.0), {1.0, 2}),
                      error);
}

TEST_CASE("mu on the unit sphere: Einstein closed form and small tau limit") {
    const LinkGeometry s2{RoundSphere{2, 1.0}};
    for (double tau : {0.5, 2.0}) {
        const double expect = 2.0 * tau - std::log(tau) - 2.0;
        REQUIRE_THAT(mu_link(s2, {tau, 2}, 1e-8, 1024).value,
                     Catch::Matchers::WithinAbs(expect, 1e-3));
    }
    const double small = mu_link(s2, {1e-3, 2}, 1e-8, 1024).value;
    REQUIRE(small > -0.05);
    REQUIRE(small <= 0.0 + 1e-12);
}

TEST_CASE("mu estimates never beat probe values") {
    const LinkGeometry s2{RoundSphere{2, 1.2}};
    const LinkOperator op = link_operator(s2, 512);
    const auto form = detail::assemble_form(SturmLiouvilleProblem{op.m, op.p, op.R});
    std::mt19937 rng(42);
    for (double tau : {0.3, 1.0}) {
        const double mu = mu_link(op, {tau, 2}, 1e-7).value;
        for (int rep = 0; rep < 50; ++rep) {
            const ScalarField probe =
                detail::normalized_against(form, random_bump_field(op.grid, rng));
            REQUIRE(mu <= w_functional_link(op, probe, {tau, 2}) + 1e-9);
        }
    }
}

TEST_CASE("parabolic scaling invariance of mu") {
    const LinkGeometry s2{RoundSphere{2, 1.0}};
    const double beta2 = 2.56;
    const double a = mu_link(s2, {0.8, 2}, 1e-8, 512).value;
    const double b = mu_link(s2.rescaled(std::sqrt(beta2)), {beta2 * 0.8, 2}, 1e-8, 512).value;
    REQUIRE_THAT(a, Catch::Matchers::WithinAbs(b, 1e-6));
}

TEST_CASE("Einstein closed forms") {
    const EinsteinLink s2 = einstein_of_round(RoundSphere{2, 1.0});
    REQUIRE_THAT(mu_einstein_closed_form(s2, {0.5, 2}),
                 Catch::Matchers::WithinAbs(std::log(2.0) - 1.0, 1e-12));
    REQUIRE_THAT(mu_einstein_closed_form(s2, {1.0, 2}),
                 Catch::Matchers::WithinAbs(0.0, 1e-12));
    const EinsteinLink s3 = einstein_of_round(RoundSphere{3, 1.0});
    REQUIRE_THAT(mu_einstein_closed_form(s3, {0.25, 3}),
                 Catch::Matchers::WithinAbs(1.5 + std::log(2.0 * pi * pi) -
                                                1.5 * std::log(pi) - 3.0,
                                            1e-12));
    REQUIRE_THROWS_AS(mu_einstein_closed_form(s2, {0.25, 2}), error);
}

TEST_CASE("nu of the unit sphere and the eta3 threshold") {
    const NuResult r = nu_link(LinkGeometry(RoundSphere{2, 1.0}), default_tau_grid(), 1e-7, 512);
    REQUIRE_THAT(r.nu, Catch::Matchers::WithinAbs(std::log(2.0) - 1.0, 1e-3));
    REQUIRE_THAT(r.argmin_tau, Catch::Matchers::WithinAbs(0.5, 0.05));
    REQUIRE(r.nu >= -eta3 - 1e-3);

    const EinsteinLink s3{3, 6.0, 2.0 * pi * pi, 0.25};
    const NuResult e = nu_link(LinkGeometry(s3), default_tau_grid());
    const double expect = 1.5 + std::log(2.0 * pi * pi) - 1.5 * std::log(4.0 * pi * 0.25) - 3.0;
    REQUIRE_THAT(e.nu, Catch::Matchers::WithinAbs(expect, 1e-3));
}

TEST_CASE("mu envelope: equality for Einstein, detection of violations") {
    const EinsteinLink s2 = einstein_of_round(RoundSphere{2, 1.0});
    std::vector<std::pair<double, double>> samples;
    for (double tau = 0.5; tau <= 8.0; tau *= 1.5)
        samples.emplace_back(tau, mu_einstein_closed_form(s2, {tau, 2}));
    const EnvelopeReport ok = mu_envelope_check(samples, s2.lambda, 2);
    REQUIRE(ok.pass);
    REQUIRE(ok.worst_violation < 1e-8);

    REQUIRE(mu_envelope_check({{1.0, -0.3}}, 2.0, 2).pass);  // single sample: vacuous

    auto broken = samples;
    broken[2].second -= 0.1;
    const EnvelopeReport bad = mu_envelope_check(broken, s2.lambda, 2);
    REQUIRE_FALSE(bad.pass);
    REQUIRE_THAT(bad.worst_violation, Catch::Matchers::WithinAbs(0.1, 1e-6));
}

TEST_CASE("W minimizers drift to the F ground state") {
    const LinkGeometry s2{RoundSphere{2, 1.0}};
    const DriftReport r = minimizer_drift_check(s2, {1.0, 10.0, 100.0}, 1e-8, 512);
    for (double d : r.h1_distance) REQUIRE(d < 1e-5);
    REQUIRE(r.non_increasing_tail);

    // determinism: repeated tau gives identical distances
    const DriftReport twice = minimizer_drift_check(s2, {1.0, 10.0, 10.0, 100.0},
                                                    1e-8, 512);
    REQUIRE_THAT(twice.h1_distance[1], Catch::Matchers::WithinAbs(twice.h1_distance[2], 1e-12));

    std::mt19937 rng(11);
    const ProfileWarped pw = random_profile(2, rng, 512, 0.05);
    const DriftReport p = minimizer_drift_check(LinkGeometry(pw), {1.0, 10.0, 100.0}, 1e-8, 512);
    REQUIRE(p.non_increasing_tail);
}
