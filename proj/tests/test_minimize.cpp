#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "conelab/link.hpp"
#include "conelab/minimize.hpp"

using namespace conelab;

namespace {

FunctionalDescriptor w_descriptor(const LinkOperator& op, double tau) {
    FunctionalDescriptor obj;
    obj.quadratic = SturmLiouvilleProblem{op.m, op.p, op.R};
    obj.tau = tau;
    obj.include_entropy = true;
    obj.offset = -0.5 * op.n * std::log(4.0 * pi * tau) - op.n;
    return obj;
}

ScalarField unit_constant(const LinkOperator& op) {
    const auto form = detail::assemble_form(SturmLiouvilleProblem{op.m, op.p, op.R});
    return detail::normalized_against(form, ScalarField::constant(op.grid, 1.0));
}

} // namespace

TEST_CASE("W on unit S2 at tau = 1/2: minimum log 2 - 1, constant minimizer") {
    const LinkOperator op = link_operator(LinkGeometry(RoundSphere{2, 1.0}), 1024);
    const auto r = minimize_normalized(w_descriptor(op, 0.5), unit_constant(op), 1e-8);
    REQUIRE(r.status == MinimizeStatus::converged);
    REQUIRE_THAT(r.minimum, Catch::Matchers::WithinAbs(std::log(2.0) - 1.0, 1e-3));
    double lo = 1e300, hi = -1e300;
    for (double v : r.minimizer.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    REQUIRE(hi - lo < 1e-6);
}

TEST_CASE("F on unit S2: minimum 2 equals the eigenvalue") {
    const LinkOperator op = link_operator(LinkGeometry(RoundSphere{2, 1.0}), 1024);
    FunctionalDescriptor obj;
    obj.quadratic = SturmLiouvilleProblem{op.m, op.p, op.R};
    obj.tau = 1.0;
    obj.include_entropy = false;
    const auto r = minimize_normalized(obj, unit_constant(op), 1e-10);
    REQUIRE_THAT(r.minimum, Catch::Matchers::WithinAbs(2.0, 1e-6));

    const double lambda = eigen_smallest(obj.quadratic).eigenvalue;
    REQUIRE(r.minimum >= lambda - 1e-8);
}

TEST_CASE("init must be normalized") {
    const LinkOperator op = link_operator(LinkGeometry(RoundSphere{2, 1.0}), 256);
    REQUIRE_THROWS_AS(
        minimize_normalized(w_descriptor(op, 1.0), ScalarField::constant(op.grid, 1.0), 1e-6),
        error);
}
