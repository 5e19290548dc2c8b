#include "doctest.h"
#include "volterra/kernel.hpp"
#include "volterra/quadrature.hpp"

#include <cmath>

using namespace volterra;

TEST_SUITE("kernel") {

TEST_CASE("fractional evaluation") {
    Kernel k = Kernel::fractional(0.5);
    CHECK(k(1.0, 0.75) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(k.order() == 0.5);
    CHECK(k.family() == KernelFamily::Fractional);
}

TEST_CASE("fractional identity eval * dist^gamma = 1") {
    Kernel k = Kernel::fractional(0.25);
    for (double dist : {1e-8, 1e-4, 0.1, 0.5, 1.0, 3.0}) {
        CHECK(k.eval_dist(dist) * std::pow(dist, 0.25) == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("closed-form moments") {
    Kernel half = Kernel::fractional(0.5);
    CHECK(half.has_primitive());
    CHECK(half.moment0(1.0, 0.0, 1.0) == doctest::Approx(2.0).epsilon(1e-13));
    // int_0^1 r (1-r)^{-1/2} dr = 4/3
    CHECK(half.moment1(1.0, 0.0, 1.0, 0.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

    Kernel one = Kernel::constant();
    CHECK(one.has_primitive());
    CHECK(one.moment0(5.0, 1.0, 3.0) == doctest::Approx(2.0).epsilon(1e-15));
    // int_1^3 (r-2) dr = 0
    CHECK(one.moment1(5.0, 1.0, 3.0, 2.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("moments agree with quadrature") {
    Kernel k = Kernel::fractional(0.25);
    const double tau = 1.2;
    DeOptions opts;
    opts.max_level = 9;
    double m0 = de_integrate_scalar(
        [&](double, double du, double) { return k.eval_dist((tau - 0.9) + du); }, 0.2, 0.9, opts);
    CHECK(k.moment0(tau, 0.2, 0.9) == doctest::Approx(m0).epsilon(1e-10));
    double m1 = de_integrate_scalar(
        [&](double r, double du, double) { return (r - 0.2) * k.eval_dist((tau - 0.9) + du); },
        0.2, 0.9, opts);
    CHECK(k.moment1(tau, 0.2, 0.9, 0.2) == doctest::Approx(m1).epsilon(1e-10));
}

TEST_CASE("damped kernel") {
    Kernel k = Kernel::damped_fractional(0.5, 2.0);
    CHECK(k.eval_dist(0.25) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-14));
    CHECK(!k.has_primitive());
}

TEST_CASE("audit constants for the constant kernel") {
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    KernelAuditReport rep = audit_kernel_bounds(Kernel::constant(), grid);
    REQUIRE(rep.bounds.size() == 5);
    CHECK(rep.bounds[0].label == "diagonal");
    CHECK(rep.bounds[0].constant == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t b = 1; b < rep.bounds.size(); ++b)
        CHECK(rep.bounds[b].constant <= 1e-12);
}

TEST_CASE("audit constants stay small for fractional kernels") {
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 4);
    KernelAuditReport quarter = audit_kernel_bounds(Kernel::fractional(0.25), grid, 2);
    CHECK(quarter.max_constant() < 10.0);
    for (const auto& b : quarter.bounds) CHECK(std::isfinite(b.constant));

    KernelAuditReport strong = audit_kernel_bounds(Kernel::fractional(0.9), grid, 2);
    for (const auto& b : strong.bounds) CHECK(std::isfinite(b.constant));
}

}  // TEST_SUITE
