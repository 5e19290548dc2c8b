#include "doctest.h"
#include "volterra/errors.hpp"
#include "volterra/sewing.hpp"
#include "volterra/tensor.hpp"

#include <cmath>
#include <vector>

using namespace volterra;

namespace {

SewingExponents smooth_exponents() {
    SewingExponents e;
    e.beta = 2.0;
    e.kappa = 0.25;
    e.theta = 0.0;
    e.alpha = 1.0;
    e.gamma = 0.25;
    return e;
}

}  // namespace

TEST_SUITE("sewing") {

TEST_CASE("additive germ is reproduced at level zero") {
    auto xi = [](double s, double t, double) {
        return Tensor::scalar(std::sin(t) - std::sin(s));
    };
    SewResult r = sew_single(xi, smooth_exponents(), 0.0, 1.0, 1.0);
    CHECK(r.value[0] == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(r.diagnostics.converged);
    for (double d : r.diagnostics.level_diffs) CHECK(d < 1e-13);
}

TEST_CASE("constant kernel first-order germ is exact after level zero") {
    // k constant and x_t = t make xi(s,t) = t - s additive.
    auto xi = [](double s, double t, double) { return Tensor::scalar(t - s); };
    SewResult r = sew_single(xi, smooth_exponents(), 0.0, 1.0, 1.0);
    CHECK(r.value[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(r.diagnostics.converged);
}

TEST_CASE("fractional frozen-endpoint germ converges to the weighted integral") {
    // xi(s,t) = k(tau, s) (t - s): limit is int_0^1 (1-r)^{-1/4} dr = 4/3.
    auto xi = [](double s, double t, double tau) {
        return Tensor::scalar(std::pow(tau - s, -0.25) * (t - s));
    };
    SewingExponents e = smooth_exponents();
    e.beta = 1.75;
    SewOptions opts;
    opts.tol = -1.0;
    opts.max_level = 12;
    SewResult r = sew_single(xi, e, 0.0, 1.0, 1.0, opts);
    CHECK(r.value[0] == doctest::Approx(4.0 / 3.0).epsilon(5e-3));
    // upper-endpoint singularity caps the rate at beta - kappa - 1 = 3/4 per level
    REQUIRE(r.diagnostics.slope_available);
    CHECK(r.diagnostics.fitted_slope > 0.5);
}

TEST_CASE("synthetic defect rate") {
    auto xi = [](double s, double t, double) {
        return Tensor::scalar(std::pow(t - s, 1.45));
    };
    SewingExponents e = smooth_exponents();
    e.beta = 1.45;
    SewOptions opts;
    opts.tol = -1.0;
    opts.max_level = 10;
    SewResult r = sew_single(xi, e, 0.0, 1.0, 1.0, opts);
    REQUIRE(r.diagnostics.slope_available);
    CHECK(r.diagnostics.fitted_slope == doctest::Approx(0.45).epsilon(0.1));
}

TEST_CASE("linearity in the germ") {
    auto xi1 = [](double s, double t, double) { return Tensor::scalar((t - s) * (t + s)); };
    auto xi2 = [](double s, double t, double) { return Tensor::scalar(std::cos(s) * (t - s)); };
    auto mix = [&](double s, double t, double tau) {
        Tensor v = xi1(s, t, tau);
        v *= 2.5;
        v += xi2(s, t, tau);
        return v;
    };
    SewingExponents e = smooth_exponents();
    SewOptions opts;
    opts.tol = 1e-10;
    SewResult a = sew_single(xi1, e, 0.0, 1.0, 1.0, opts);
    SewResult b = sew_single(xi2, e, 0.0, 1.0, 1.0, opts);
    SewResult m = sew_single(mix, e, 0.0, 1.0, 1.0, opts);
    CHECK(m.value[0] == doctest::Approx(2.5 * a.value[0] + b.value[0]).epsilon(1e-8));
}

TEST_CASE("additivity of the output") {
    auto xi = [](double s, double t, double) {
        return Tensor::scalar(std::exp(0.5 * (s + t)) * (t - s));
    };
    SewingExponents e = smooth_exponents();
    e.beta = 3.0;
    SewOptions opts;
    opts.tol = 1e-8;
    const double full = sew_single(xi, e, 0.0, 1.0, 1.0, opts).value[0];
    const double left = sew_single(xi, e, 0.0, 0.4, 1.0, opts).value[0];
    const double right = sew_single(xi, e, 0.4, 1.0, 1.0, opts).value[0];
    CHECK(std::abs(full - left - right) < 2e-8);
}

TEST_CASE("non-decaying germ raises NonCauchy") {
    auto xi = [](double, double, double) { return Tensor::scalar(1.0); };
    SewingExponents e = smooth_exponents();
    SewOptions opts;
    opts.tol = 1e-12;
    CHECK_THROWS_AS(sew_single(xi, e, 0.0, 1.0, 1.0, opts), NonCauchy);
}

TEST_CASE("double-base germ with zero defect is exact") {
    auto xi = [](double base, double s, double t, double tau) {
        return Tensor::scalar((t - s) * std::cos(base) * (1.0 + tau));
    };
    SewingExponents e = smooth_exponents();
    e.theta = 0.3;
    SewResult r = sew_double(xi, e, 0.1, 0.2, 0.9, 1.0);
    CHECK(r.value[0] == doctest::Approx(0.7 * std::cos(0.1) * 2.0).epsilon(1e-12));
}

TEST_CASE("singular base guard") {
    auto xi = [](double, double s, double t, double) { return Tensor::scalar(t - s); };
    SewingExponents e = smooth_exponents();
    e.theta = 1.0;
    CHECK_THROWS_AS(sew_double(xi, e, 0.2, 0.2, 1.0, 1.0), SingularBase);
}

TEST_CASE("slope fit helper") {
    std::vector<double> diffs;
    for (int k = 0; k < 8; ++k) diffs.push_back(std::pow(2.0, -0.6 * k));
    CHECK(fit_decay_slope(diffs, 0, 7) == doctest::Approx(0.6).epsilon(1e-9));
}

}  // TEST_SUITE
