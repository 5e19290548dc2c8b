#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/driver.hpp"
#include "volterra/errors.hpp"
#include "volterra/kernel.hpp"
#include "volterra/signature.hpp"
#include "volterra/solver.hpp"
#include "volterra/tensor.hpp"

using namespace volterra;

namespace {

DrivingPath unit_line() {
    return DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
}

SolverOptions fast_opts() {
    SolverOptions opts;
    opts.grid_level = 8;
    return opts;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("step choice") {
    // M = 0 disables both bounds.
    CHECK(choose_step(0.0, 5.0, 0.8, 0.6, 1.0, 3.5, 10.0) == 3.5);

    // With M = 1, Q = 0 the ball bound is (0.5 / (2 c))^(1/ex), the
    // contraction bound (0.5 / c)^(1/ex); c = 0.25, ex = 0.25 gives exactly 1.
    const double t1 = choose_step(1.0, 0.0, 0.85, 0.6, 0.25, 5.0, 5.0);
    CHECK(t1 == doctest::Approx(1.0).epsilon(1e-12));

    // Doubling c_hat scales the binding bound by 2^(-1/ex) = 1/16.
    const double t2 = choose_step(1.0, 0.0, 0.85, 0.6, 0.5, 5.0, 5.0);
    CHECK(t2 == doctest::Approx(t1 / 16.0).epsilon(1e-10));

    // A tiny remaining horizon is returned as-is, never an underflow.
    CHECK(choose_step(1.0, 1.0, 0.85, 0.6, 1.0, 1e-9, 1.0) == 1e-9);

    CHECK_THROWS_AS((void)choose_step(1.0, 0.0, 0.85, 0.6, 1e30, 1.0, 1.0), StepUnderflow);
    CHECK_THROWS_AS((void)choose_step(1.0, 0.0, 0.6, 0.85, 1.0, 1.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)choose_step(-1.0, 0.0, 0.85, 0.6, 1.0, 1.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("unit integrand against a fractional kernel") {
    // y_t = y0 + int_0^t (t-r)^(-1/4) dr = y0 + t^(3/4) / (3/4).
    auto k = Kernel::fractional(0.25);
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::constant(1, 1, Tensor({1, 1}, {1.0}));
    Tensor y0({1}, {0.7});
    SolutionTrace trace = solve(sig, f, y0, 1.0, fast_opts());

    REQUIRE(trace.times.size() == 257);
    REQUIRE(trace.diagonal.size() == trace.times.size());
    CHECK(trace.diagonal.front()[0] == 0.7);
    for (size_t i = 0; i < trace.times.size(); ++i) {
        const double t = trace.times[i];
        const double want = 0.7 + std::pow(t, 0.75) / 0.75;
        CHECK(std::abs(trace.diagonal[i][0] - want) <= 1e-9);
    }
    REQUIRE(!trace.steps.empty());
    for (const StepDiagnostics& st : trace.steps) {
        CHECK(st.q_hat < 1.0);
        CHECK(st.iters >= 1);
        CHECK(st.t1 > st.t0);
    }
    for (size_t i = 0; i + 1 < trace.steps.size(); ++i)
        CHECK(trace.steps[i].t1 == trace.steps[i + 1].t0);
    CHECK(trace.steps.front().t0 == 0.0);
    CHECK(trace.steps.back().t1 == doctest::Approx(1.0));
}

TEST_CASE("off-diagonal slices of the unit-integrand solution") {
    auto k = Kernel::fractional(0.25);
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::constant(1, 1, Tensor({1, 1}, {1.0}));
    SolverOptions opts = fast_opts();
    opts.tau_slices = {0.6};
    SolutionTrace trace = solve(sig, f, Tensor({1}, {0.7}), 1.0, opts);

    REQUIRE(trace.slice_taus == std::vector<double>{0.6});
    REQUIRE(trace.slices.size() == 1);
    REQUIRE(trace.slices[0].size() >= 2);
    const double tau = 0.6;
    for (size_t i = 0; i < trace.slices[0].size(); ++i) {
        const double t = trace.times[i];
        REQUIRE(t <= tau + 1e-9);
        const double want = 0.7 + (std::pow(tau, 0.75) - std::pow(tau - t, 0.75)) / 0.75;
        CHECK(std::abs(trace.slices[0][i][0] - want) <= 1e-9);
    }
}

TEST_CASE("linear integrand reproduces the exponential") {
    auto k = Kernel::constant();
    VolterraSignature sig(k, unit_line());
    Tensor slope({1, 1, 1}, {1.0});
    Tensor offset({1, 1}, {0.0});
    SmoothFunction f = SmoothFunction::linear(1, 1, slope, offset);
    SolutionTrace trace = solve(sig, f, Tensor({1}, {1.0}), 1.0, fast_opts());
    for (size_t i = 0; i < trace.times.size(); ++i) {
        const double want = std::exp(trace.times[i]);
        CHECK(std::abs(trace.diagonal[i][0] - want) <= 1e-4);
    }
}

TEST_CASE("sine integrand against a Runge-Kutta oracle") {
    auto k = Kernel::constant();
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::sine(1, 1);
    SolutionTrace trace = solve(sig, f, Tensor({1}, {0.7}), 1.0, fast_opts());

    double y = 0.7;
    const double h = 1e-3;
    for (int i = 0; i < 1000; ++i) {
        const double k1 = std::sin(y);
        const double k2 = std::sin(y + 0.5 * h * k1);
        const double k3 = std::sin(y + 0.5 * h * k2);
        const double k4 = std::sin(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    CHECK(std::abs(trace.diagonal.back()[0] - y) <= 1e-4);
}

TEST_CASE("fixed point is independent of the starting bundle") {
    auto k = Kernel::constant();
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::sine(1, 1);
    const double y0 = 0.7;
    SolutionTrace trace = solve(sig, f, Tensor({1}, {y0}), 1.0, fast_opts());

    // Flat start: correct data at t = 0, wrong everywhere else.
    Tensor v0({1}, {y0});
    Tensor dot0({1, 1}, {std::sin(y0)});
    Tensor cherry0({1, 1, 1}, {std::cos(y0) * std::sin(y0)});
    Tensor pair0({1, 1, 1}, {0.0});
    ControlledPath z({1}, 1, [v0](double, double) { return v0; },
                     [dot0](double, double, double) { return dot0; },
                     [cherry0](double, double, double, double) { return cherry0; },
                     [pair0](double, double, double, double) { return pair0; }, true);

    for (int it = 0; it < 15; ++it) z = picard_map(sig, f, z, {0.0, 1.0}, fast_opts());

    for (size_t i = 0; i < trace.times.size(); i += 32) {
        const double t = trace.times[i];
        CHECK(std::abs(z.value(t, t)[0] - trace.diagonal[i][0]) <= 1e-8);
    }
}

TEST_CASE("solution path closes the loop") {
    auto k = Kernel::fractional(0.25);
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::sine(1, 1);
    SolverOptions opts = fast_opts();
    SolutionTrace trace = solve(sig, f, Tensor({1}, {0.7}), 1.0, opts);

    ControlledPath star = solution_path(sig, f, trace, opts);
    for (size_t i = 0; i < trace.times.size(); i += 16) {
        const double t = trace.times[i];
        CHECK(std::abs(star.value(t, t)[0] - trace.diagonal[i][0]) <= 2.0 * opts.picard_tol);
    }

    ControlledPath once = picard_map(sig, f, star, {0.0, 1.0}, opts);
    double residual = 0.0;
    for (size_t i = 0; i < trace.times.size(); ++i) {
        const double t = trace.times[i];
        residual = std::max(residual,
                            std::abs(once.value(t, t)[0] - trace.diagonal[i][0]));
    }
    CHECK(residual <= 3.0 * opts.picard_tol);
}

TEST_CASE("window splitting preserves the solution") {
    auto k = Kernel::constant();
    VolterraSignature sig(k, unit_line());
    Tensor slope({1, 1, 1}, {1.0});
    Tensor offset({1, 1}, {0.0});
    SmoothFunction f = SmoothFunction::linear(1, 1, slope, offset);
    SolverOptions opts = fast_opts();
    opts.c_hat0 = 1.1;
    SolutionTrace trace = solve(sig, f, Tensor({1}, {1.0}), 1.0, opts);
    CHECK(trace.steps.size() > 1);
    for (size_t i = 0; i + 1 < trace.steps.size(); ++i)
        CHECK(trace.steps[i].t1 == trace.steps[i + 1].t0);
    for (size_t i = 0; i < trace.times.size(); ++i)
        CHECK(std::abs(trace.diagonal[i][0] - std::exp(trace.times[i])) <= 1e-4);
}

TEST_CASE("thread count does not change the trace") {
    auto k = Kernel::fractional(0.25);
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::sine(1, 1);
    SolverOptions one = fast_opts();
    one.grid_level = 7;
    one.tau_slices = {0.5};
    SolverOptions four = one;
    four.threads = 4;
    SolutionTrace a = solve(sig, f, Tensor({1}, {0.7}), 1.0, one);
    SolutionTrace b = solve(sig, f, Tensor({1}, {0.7}), 1.0, four);
    REQUIRE(a.diagonal.size() == b.diagonal.size());
    for (size_t i = 0; i < a.diagonal.size(); ++i)
        CHECK(max_abs_diff(a.diagonal[i], b.diagonal[i]) == 0.0);
    REQUIRE(a.slices[0].size() == b.slices[0].size());
    for (size_t i = 0; i < a.slices[0].size(); ++i)
        CHECK(max_abs_diff(a.slices[0][i], b.slices[0][i]) == 0.0);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i)
        CHECK(a.steps[i].q_hat == b.steps[i].q_hat);
}

TEST_CASE("input validation") {
    auto k = Kernel::fractional(0.3);
    auto x05 = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 0.5);
    VolterraSignature tight(k, x05);
    SmoothFunction f = SmoothFunction::sine(1, 1);
    CHECK_THROWS_AS((void)solve(tight, f, Tensor({1}, {0.0}), 1.0), ExponentError);

    VolterraSignature sig(Kernel::fractional(0.25), unit_line());
    SolverOptions bad_beta = fast_opts();
    bad_beta.beta = 1.0;
    CHECK_THROWS_AS((void)solve(sig, f, Tensor({1}, {0.0}), 1.0, bad_beta), ExponentError);
    SolverOptions low_beta = fast_opts();
    low_beta.beta = 0.45;
    CHECK_THROWS_AS((void)solve(sig, f, Tensor({1}, {0.0}), 1.0, low_beta), ExponentError);

    CHECK_THROWS_AS((void)solve(sig, f, Tensor({1}, {0.0}), 2.0, fast_opts()),
                    std::invalid_argument);

    ControlledPath flat = ControlledPath::constant(Tensor({1}, {0.7}), 1);
    CHECK_THROWS_AS((void)picard_map(sig, f, flat, {0.0, 1.0}, fast_opts()),
                    InitialBundleMismatch);
}

TEST_CASE("iteration cap failure is reported honestly") {
    auto k = Kernel::fractional(0.25);
    VolterraSignature sig(k, unit_line());
    SmoothFunction f = SmoothFunction::constant(1, 1, Tensor({1, 1}, {1.0}));
    SolverOptions opts;
    opts.grid_level = 6;
    opts.max_picard = 1;
    CHECK_THROWS_AS((void)solve(sig, f, Tensor({1}, {0.7}), 1.0, opts), NoConvergence);
}

}  // TEST_SUITE
