#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

#include "conelab/field.hpp"
#include "conelab/grid.hpp"

using namespace conelab;

TEST_CASE("grid invariants") {
    for (auto kind : {SpacingKind::uniform, SpacingKind::logarithmic}) {
        const RadialGrid g = kind == SpacingKind::uniform
                                 ? RadialGrid::uniform(0.5, 2.5, 128)
                                 : RadialGrid::logarithmic(0.5, 2.5, 128);
        double total = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            REQUIRE(g.weight(i) > 0.0);
            if (i) REQUIRE(g.node(i) > g.node(i - 1));
            total += g.weight(i);
        }
        REQUIRE_THAT(total, Catch::Matchers::WithinRel(g.length(), 1e-12));
    }
    REQUIRE_THROWS_AS(RadialGrid::uniform(0.0, 1.0, 8), error);
    REQUIRE_THROWS_AS(RadialGrid::logarithmic(0.0, 1.0, 64), error);
}

TEST_CASE("integrate: constants, monomials, zero density") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, 2.0, 2048));
    const ScalarField one = ScalarField::constant(g, 1.0);
    REQUIRE_THAT(integrate(one, one), Catch::Matchers::WithinAbs(2.0, 1e-12));

    // w(r) = r against density r^2 on [0, 1]: integral of r^3 is 1/4
    auto gu = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, 1.0, 2048));
    std::vector<double> lin(gu->size()), quad(gu->size());
    for (std::size_t i = 0; i < gu->size(); ++i) {
        lin[i] = gu->node(i);
        quad[i] = gu->node(i) * gu->node(i);
    }
    const ScalarField w(gu, lin), d(gu, quad);
    REQUIRE_THAT(integrate(w, d), Catch::Matchers::WithinAbs(0.25, 1e-8));

    const ScalarField zero = ScalarField::constant(gu, 0.0);
    REQUIRE(integrate(w, zero) == 0.0);

    REQUIRE_THROWS_AS(integrate(w, one), error);  // different grids
}

TEST_CASE("integrate is bilinear") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::logarithmic(0.1, 10.0, 256));
    std::mt19937 rng(42);
    auto rand_field = [&]() {
        std::vector<double> v(g->size());
        for (auto& x : v) x = double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        return ScalarField(g, std::move(v));
    };
    for (int rep = 0; rep < 20; ++rep) {
        const ScalarField a = rand_field(), b = rand_field(), d = rand_field();
        const double s = double(rng() >> 11) * 0x1.0p-53 * 4.0 - 2.0;
        std::vector<double> comb(g->size());
        for (std::size_t i = 0; i < g->size(); ++i) comb[i] = a[i] + s * b[i];
        const ScalarField ab(g, comb);
        REQUIRE_THAT(integrate(ab, d),
                     Catch::Matchers::WithinAbs(integrate(a, d) + s * integrate(b, d), 1e-10));
    }
}

TEST_CASE("derivatives: log-grid chain rule and fourth order") {
    auto g = std::make_shared<RadialGrid>(RadialGrid::logarithmic(0.01, 10.0, 1024));
    std::vector<double> v(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) v[i] = std::pow(g->node(i), 1.7);
    const ScalarField f(g, v);
    const ScalarField df = differentiate(f, 4);
    for (std::size_t i = 4; i + 4 < g->size(); i += 61) {
        const double expect = 1.7 * std::pow(g->node(i), 0.7);
        REQUIRE_THAT(df[i], Catch::Matchers::WithinRel(expect, 1e-8));
    }
}
