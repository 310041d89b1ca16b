#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "conelab/inequalities.hpp"
#include "conelab/random_fields.hpp"

using namespace conelab;

TEST_CASE("hardy: random bumps stay below the sharp constant") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::logarithmic(0.05, 20.0, 2048));
    std::mt19937 rng(42);
    for (int n : {2, 3}) {
        for (int rep = 0; rep < 50; ++rep) {
            const ScalarField v = random_supported_bump(g, rng);
            const HardyResult h = weighted_hardy_gap(v, n);
            REQUIRE(h.ratio < 1.0);
            REQUIRE(h.lhs > 0.0);
        }
    }
}

TEST_CASE("hardy: near-extremal sweep climbs toward 1") {
    auto g = hardy_grid(8192);
    for (int n : {2, 3}) {
        double prev = 0.0;
        for (double delta : {0.1, 0.03, 0.01}) {
            const double ratio = weighted_hardy_gap(hardy_near_extremal(g, n, delta), n).ratio;
            REQUIRE(ratio < 1.0);
            REQUIRE(ratio > prev);
            prev = ratio;
        }
        REQUIRE(prev > 0.95);
    }
}

TEST_CASE("hardy: homogeneity and zero-field error") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::logarithmic(0.05, 20.0, 1024));
    std::mt19937 rng(3);
    const ScalarField v = random_supported_bump(g, rng);
    std::vector<double> scaled(v.values());
    for (auto& x : scaled) x *= 7.0;
    const ScalarField v7(g, scaled, BoundaryKind::dirichlet_zero, BoundaryKind::dirichlet_zero);
    REQUIRE_THAT(weighted_hardy_gap(v7, 2).ratio,
                 Catch::Matchers::WithinAbs(weighted_hardy_gap(v, 2).ratio, 1e-12));
    REQUIRE_THROWS_AS(weighted_hardy_gap(ScalarField::constant(g, 0.0), 2), error);
}

TEST_CASE("log-Sobolev: Gaussian equality family") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::logarithmic(1e-6, 60.0, 8192));
    for (int n : {2, 3}) {
        for (double tau0 : {0.3, 1.0, 3.0}) {
            const ScalarField w = log_sobolev_gaussian(g, n, tau0);
            REQUIRE_THAT(radial_log_sobolev_gap(w, n, tau0),
                         Catch::Matchers::WithinAbs(0.0, 1e-5));
        }
    }
}

TEST_CASE("log-Sobolev: strict positivity off the Gaussians") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::logarithmic(1e-4, 30.0, 4096));
    std::mt19937 rng(42);
    for (int n : {2, 3}) {
        for (double tau0 : {0.3, 1.0, 3.0}) {
            for (int rep = 0; rep < 20; ++rep) {
                const ScalarField w = normalize_radial_l2(random_bump_field(g, rng), n);
                REQUIRE(radial_log_sobolev_gap(w, n, tau0) > -1e-6);
            }
        }
    }
    REQUIRE_THROWS_AS(
        radial_log_sobolev_gap(ScalarField::constant(g, 1.0), 2, 1.0), error);
}

TEST_CASE("epsilon triple from the betas") {
    const EpsilonTriple zero = epsilons_from_betas({1.0, 1.0, 3});
    REQUIRE(zero.eps1 == 0.0);
    REQUIRE(zero.eps2 == 0.0);
    REQUIRE(zero.eps3 == 0.0);

    const EpsilonTriple e = epsilons_from_betas({0.9, 1.1, 3});
    REQUIRE_THAT(e.eps1, Catch::Matchers::WithinRel(
                             1.0 - std::pow(0.9, 3) / std::pow(1.1, 7), 1e-12));
    REQUIRE_THAT(e.eps2, Catch::Matchers::WithinRel(std::pow(1.1 / 0.9, 3) - 1.0, 1e-12));
    REQUIRE_THAT(e.eps3, Catch::Matchers::WithinRel(
                             (std::pow(0.9 / 1.1, 3) - std::pow(1.1 / 0.9, 3)) *
                                     sphere_volume(3) / std::exp(1.0) +
                                 3.0 * std::log(0.9),
                             1e-12));
    REQUIRE(e.eps3 < 0.0);  // the display's sign, flagged in reports

    // widening the bracket grows eps1 and eps2
    const EpsilonTriple wider = epsilons_from_betas({0.85, 1.15, 3});
    REQUIRE(wider.eps1 > e.eps1);
    REQUIRE(wider.eps2 > e.eps2);

    REQUIRE_THROWS_AS(epsilons_from_betas({1.2, 1.0, 3}), error);
}

TEST_CASE("perturbation bounds: identity case is an equality") {
    std::mt19937 rng(42);
    const LinkGeometry s2{RoundSphere{2, 1.0}};
    const LinkOperator op = link_operator(s2, 512);
    std::vector<ScalarField> probes;
    for (int i = 0; i < 10; ++i) probes.push_back(random_bump_field(op.grid, rng));
    const auto rep = sphere_perturbation_bounds_check(s2, {1.0, 1.0, 2}, probes, 1.0, 512);
    REQUIRE_THAT(rep.worst_f, Catch::Matchers::WithinAbs(0.0, 1e-8));
    REQUIRE_THAT(rep.worst_n, Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("perturbation bounds: shrunk sphere has positive margins") {
    std::mt19937 rng(42);
    const LinkGeometry link{RoundSphere{2, 0.95}};
    const LinkOperator op = link_operator(link, 512);
    std::vector<ScalarField> probes;
    for (int i = 0; i < 50; ++i) probes.push_back(random_bump_field(op.grid, rng));
    const auto rep = sphere_perturbation_bounds_check(link, {0.95, 1.0, 2}, probes, 1.0, 512);
    REQUIRE(rep.worst_f > -1e-9);
    REQUIRE(rep.worst_n > -1e-9);
}

TEST_CASE("perturbation bounds: constant probe matches the volume closed form") {
    const LinkGeometry link{RoundSphere{2, 0.95}};
    const LinkOperator op = link_operator(link, 512);
    const double tau = 1.0;
    std::vector<ScalarField> probes{ScalarField::constant(op.grid, 0.7)};
    const auto rep = sphere_perturbation_bounds_check(link, {0.95, 1.0, 2}, probes, tau, 512);

    // closed forms: constant phi means F = R (constant), N = log vol
    const int n = 2;
    const double beta = 0.95;
    const double volN = std::pow(beta, n) * sphere_volume(n);
    const double b1n = std::pow(0.95, n);
    const double FN = n * (n - 1) / (beta * beta);
    const double FS = n * (n - 1);
    const double f_margin = FN - b1n / std::pow(1.0, n + 4) * FS;
    const double NN = std::log(volN);
    const double NS = std::log(sphere_volume(n));
    const double n_shift = (b1n - 1.0 / b1n) * sphere_volume(n) / std::exp(1.0) +
                           n * std::log(0.95);
    const double n_margin = NN - (NS / b1n + n_shift);
    REQUIRE_THAT(rep.margins[0].f_margin, Catch::Matchers::WithinAbs(f_margin, 1e-8));
    REQUIRE_THAT(rep.margins[0].n_margin, Catch::Matchers::WithinAbs(n_margin, 1e-8));
    REQUIRE_THAT(rep.margins[0].delta, Catch::Matchers::WithinAbs(-std::log(b1n), 1e-8));
}

TEST_CASE("bracket violations are rejected") {
    const LinkGeometry link{RoundSphere{2, 1.3}};
    const LinkOperator op = link_operator(link, 256);
    std::vector<ScalarField> probes{ScalarField::constant(op.grid, 0.0)};
    REQUIRE_THROWS_AS(
        sphere_perturbation_bounds_check(link, {0.95, 1.05, 2}, probes, 1.0, 256), error);
}

TEST_CASE("L bound: the unperturbed sphere is the W identity") {
    std::mt19937 rng(42);
    const LinkGeometry s2{RoundSphere{2, 1.0}};
    const LinkOperator op = link_operator(s2, 512);
    std::vector<ScalarField> probes;
    for (int i = 0; i < 10; ++i) probes.push_back(random_bump_field(op.grid, rng));
    const auto rep = l_bound_check(s2, {0.0, 0.0, 0.0}, probes, {0.3, 1.0, 3.0}, 512);
    REQUIRE(rep.passed_convention == "both");
    REQUIRE_THAT(rep.worst_margin(), Catch::Matchers::WithinAbs(0.0, 1e-8));
}

TEST_CASE("L bound: perturbed sphere with its own epsilons") {
    std::mt19937 rng(42);
    const LinkGeometry link{RoundSphere{2, 0.95}};
    const LinkOperator op = link_operator(link, 512);
    std::vector<ScalarField> probes;
    for (int i = 0; i < 25; ++i) probes.push_back(random_bump_field(op.grid, rng));
    const EpsilonTriple eps = epsilons_from_betas({0.95, 1.0, 2});
    const auto rep = l_bound_check(link, eps, probes, {0.3, 1.0, 3.0}, 512);
    // the display's eps3 sign makes the bound fail; the negated convention holds
    REQUIRE(rep.worst_margin_negated > -1e-9);
    REQUIRE(rep.passed_convention == "negated");
}

TEST_CASE("L bound: an undersized eps1 is caught") {
    // eps1 binds on the stretched side, where the F comparison F^N = F^S/beta^2
    // is exact for every probe; starving eps1 there must fail at large tau
    std::mt19937 rng(42);
    const LinkGeometry link{RoundSphere{2, 1.25}};
    const LinkOperator op = link_operator(link, 512);
    std::vector<ScalarField> probes;
    for (int i = 0; i < 25; ++i) probes.push_back(random_bump_field(op.grid, rng));
    EpsilonTriple eps = epsilons_from_betas({1.0, 1.25, 2});
    const auto sane = l_bound_check(link, eps, probes, {10.0, 30.0}, 512);
    REQUIRE(sane.worst_margin_negated > -1e-9);
    eps.eps1 *= 0.25;  // deliberately too small: below the sharp 1 - 1/beta^2
    const auto rep = l_bound_check(link, eps, probes, {10.0, 30.0}, 512);
    REQUIRE(rep.worst_margin_negated < 0.0);
}
