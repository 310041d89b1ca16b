#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

#include "conelab/link.hpp"
#include "conelab/sturm_liouville.hpp"

using namespace conelab;

namespace {

SturmLiouvilleProblem round_problem(int n, double beta, std::size_t nodes) {
    const LinkOperator op = link_operator(LinkGeometry(RoundSphere{n, beta}), nodes);
    return SturmLiouvilleProblem{op.m, op.p, op.R};
}

} // namespace

TEST_CASE("round S2: constant ground state, eigenvalue R") {
    const auto sl = round_problem(2, 1.0, 512);
    const EigenResult r = eigen_smallest(sl);
    REQUIRE_THAT(r.eigenvalue, Catch::Matchers::WithinAbs(2.0, 1e-6));
    // constant eigenfunction
    double lo = 1e300, hi = -1e300;
    for (double v : r.eigenfunction.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    REQUIRE(hi - lo < 1e-8 * std::abs(hi));
}

TEST_CASE("round 2*S3: eigenvalue n(n-1)/beta^2") {
    const auto sl = round_problem(3, 2.0, 512);
    REQUIRE_THAT(eigen_smallest(sl).eigenvalue, Catch::Matchers::WithinAbs(1.5, 1e-6));
}

TEST_CASE("potential shift moves the eigenvalue by the shift") {
    auto sl = round_problem(2, 1.0, 256);
    const double base = eigen_smallest(sl).eigenvalue;
    std::vector<double> shifted(sl.potential.values());
    for (auto& v : shifted) v += 3.25;
    sl.potential = ScalarField(sl.potential.grid_ptr(), shifted);
    REQUIRE_THAT(eigen_smallest(sl).eigenvalue,
                 Catch::Matchers::WithinAbs(base + 3.25, 1e-9));
}

TEST_CASE("eigenvalue is below every Rayleigh quotient") {
    // non-constant potential on a Dirichlet interval
    auto g = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, 1.0, 256));
    std::vector<double> m(g->size(), 1.0), p(g->size(), 1.0), V(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) V[i] = std::cos(3.0 * g->node(i));
    SturmLiouvilleProblem sl{ScalarField(g, m), ScalarField(g, p), ScalarField(g, V),
                             BoundaryKind::dirichlet_zero, BoundaryKind::dirichlet_zero};
    const double lambda = eigen_smallest(sl).eigenvalue;

    const auto form = detail::assemble_form(sl);
    std::mt19937 rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> v(form.size());
        for (auto& x : v) x = double(rng() >> 11) * 0x1.0p-53 - 0.5;
        const double q = form.energy(v) / form.mass(v);
        REQUIRE(lambda <= q + 1e-9 * (std::abs(q) + 1.0));
    }
}

TEST_CASE("dirichlet interval oracle: smallest eigenvalue of -u'' on [0,1]") {
    // independent oracle: -u'' = lambda u with u(0)=u(1)=0 has lambda = pi^2
    auto g = std::make_shared<RadialGrid>(RadialGrid::uniform(0.0, 1.0, 1024));
    std::vector<double> one(g->size(), 1.0), zero(g->size(), 0.0);
    SturmLiouvilleProblem sl{ScalarField(g, one), ScalarField(g, one), ScalarField(g, zero),
                             BoundaryKind::dirichlet_zero, BoundaryKind::dirichlet_zero};
    REQUIRE_THAT(eigen_smallest(sl).eigenvalue,
                 Catch::Matchers::WithinRel(pi * pi, 1e-5));
}
