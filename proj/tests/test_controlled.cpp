#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/driver.hpp"
#include "volterra/errors.hpp"
#include "volterra/kernel.hpp"
#include "volterra/signature.hpp"
#include "volterra/tensor.hpp"

using namespace volterra;

namespace {

VolterraSignature flat_line_signature() {
    auto k = Kernel::constant();
    auto x = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
    return VolterraSignature(k, x);
}

ConvOptions tensor_mode() {
    ConvOptions opts;
    opts.mode = ConvMode::TensorProduct;
    return opts;
}

}  // namespace

TEST_SUITE("controlled") {

TEST_CASE("bundle stores its closures and shapes") {
    auto value = [](double t, double tau) { return Tensor({2}, {t, tau}); };
    auto dot = [](double t, double, double p) { return Tensor({2, 1}, {t, p}); };
    auto slot = [](double, double, double q, double p) { return Tensor({2, 1, 1}, {q, p}); };
    ControlledPath y({2}, 1, value, dot, slot, slot, false);
    CHECK(y.value_shape() == std::vector<int>{2});
    CHECK(y.dot_shape() == std::vector<int>{2, 1});
    CHECK(y.slot_shape() == std::vector<int>{2, 1, 1});
    CHECK(y.driver_dim() == 1);
    CHECK_FALSE(y.in_d_hat());
    CHECK(y.value(0.3, 0.8)[0] == 0.3);
    CHECK(y.value(0.3, 0.8)[1] == 0.8);
    CHECK(y.dot(0.1, 0.2, 0.9)[1] == 0.9);
    CHECK(y.cherry(0.0, 0.0, 0.5, 0.25)[0] == 0.5);
    CHECK(y.pair(0.0, 0.0, 0.5, 0.25)[1] == 0.25);
    CHECK(y.initial_value()[0] == 0.0);
}

TEST_CASE("constant bundle") {
    ControlledPath y = ControlledPath::constant(Tensor({2}, {1.5, -0.5}), 3);
    CHECK(y.driver_dim() == 3);
    CHECK(y.in_d_hat());
    CHECK(y.value(0.7, 0.9)[0] == 1.5);
    CHECK(y.dot(0.7, 0.9, 0.1).max_abs() == 0.0);
    CHECK(y.dot_shape() == std::vector<int>{2, 3});
    CHECK(y.cherry(0.7, 0.9, 0.1, 0.05).max_abs() == 0.0);
    CHECK(y.pair(0.7, 0.9, 0.1, 0.05).max_abs() == 0.0);
}

TEST_CASE("canonical lift wraps the first level") {
    auto k = Kernel::fractional(0.25);
    auto x = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
    VolterraSignature sig(k, x);
    ControlledPath y = ControlledPath::canonical_lift(sig);
    CHECK(y.in_d_hat());
    CHECK(y.driver_dim() == 1);
    CHECK(max_abs_diff(y.value(0.6, 0.9), sig.level1(0.0, 0.6, 0.9)) == 0.0);
    Tensor id = y.dot(0.4, 0.7, 0.5);
    CHECK(id.shape() == std::vector<int>{1, 1});
    CHECK(id[0] == 1.0);
    CHECK(y.cherry(0.4, 0.7, 0.5, 0.3).max_abs() == 0.0);
    CHECK(y.pair(0.4, 0.7, 0.5, 0.3).max_abs() == 0.0);
}

TEST_CASE("smooth function families") {
    SmoothFunction c = SmoothFunction::constant(2, 1, Tensor({2, 1}, {3.0, -1.0}));
    CHECK(c.m() == 2);
    CHECK(c.d() == 1);
    Tensor y({2}, {0.4, 0.6});
    CHECK(c.eval(y).at({0, 0}) == 3.0);
    CHECK(c.d1(y).max_abs() == 0.0);
    CHECK_NOTHROW(c.probe_derivatives());

    Tensor slope({1, 1, 1}, {2.0});
    Tensor offset({1, 1}, {0.3});
    SmoothFunction lin = SmoothFunction::linear(1, 1, slope, offset);
    Tensor y1({1}, {0.5});
    CHECK(lin.eval(y1).at({0, 0}) == doctest::Approx(1.3).epsilon(1e-14));
    CHECK(lin.d1(y1)[0] == 2.0);
    CHECK(lin.d2(y1).max_abs() == 0.0);
    CHECK_NOTHROW(lin.probe_derivatives());

    SmoothFunction s = SmoothFunction::sine(2, 2, 0.8, 1.5);
    CHECK(s.eval(y).shape() == std::vector<int>{2, 2});
    CHECK(s.eval(y).at({0, 0}) == doctest::Approx(0.8 * std::sin(1.5 * 0.4)).epsilon(1e-12));
    CHECK_NOTHROW(s.probe_derivatives());
    CHECK_NOTHROW(SmoothFunction::scaled_logistic(1, 2, 1.0, 2.0).probe_derivatives());
}

TEST_CASE("derivative probe rejects an inconsistent level") {
    auto f = [](const Tensor& y) { return Tensor({1, 1}, {std::sin(y[0])}); };
    auto f1_bad = [](const Tensor& y) { return Tensor({1, 1, 1}, {1.1 * std::cos(y[0])}); };
    auto f2 = [](const Tensor& y) { return Tensor({1, 1, 1, 1}, {-1.1 * std::sin(y[0])}); };
    auto f3 = [](const Tensor& y) { return Tensor({1, 1, 1, 1, 1}, {-1.1 * std::cos(y[0])}); };
    auto f4 = [](const Tensor& y) { return Tensor({1, 1, 1, 1, 1, 1}, {1.1 * std::sin(y[0])}); };
    SmoothFunction bad = SmoothFunction::custom(1, 1, "skewed", f, f1_bad, f2, f3, f4, 1.1);
    CHECK_THROWS_AS(bad.probe_derivatives(), DerivativeMismatch);
}

TEST_CASE("first-order convolution of a constant matches the block") {
    VolterraSignature sig = flat_line_signature();
    const Tensor c = Tensor::scalar(2.5);
    Tensor got = conv1(sig, 0.0, 0.0, 1.0, 1.0, [&c](double) { return c; }, tensor_mode());
    Tensor want = sig.level1(0.0, 1.0, 1.0);
    want *= 2.5;
    CHECK(max_abs_diff(got, want) == 0.0);
}

TEST_CASE("first-order convolution with a moving integrand") {
    VolterraSignature sig = flat_line_signature();
    Tensor got = conv1(sig, 0.0, 0.0, 1.0, 1.0,
                       [](double r) { return Tensor::scalar(r); }, tensor_mode());
    REQUIRE(got.shape() == std::vector<int>{1});
    CHECK(got[0] == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("higher convolutions of the unit integrand rebuild the blocks") {
    VolterraSignature sig = flat_line_signature();
    auto unit2 = [](double, double) { return Tensor::scalar(1.0); };
    auto unit3 = [](double, double, double) { return Tensor::scalar(1.0); };

    Tensor c2 = conv2(sig, 0.0, 1.0, 1.0, unit2, tensor_mode());
    CHECK(max_abs_diff(c2, sig.level(TreeSymbol::Chain2, 0.0, 1.0, 1.0)) < 1e-7);

    Tensor cp = conv_pair(sig, 0.0, 1.0, 1.0, unit2, tensor_mode());
    CHECK(max_abs_diff(cp, sig.level(TreeSymbol::Pair, 0.0, 1.0, 1.0)) < 1e-7);

    Tensor c3 = conv3(sig, TreeSymbol::Chain3, 0.0, 1.0, 1.0, unit3, tensor_mode());
    CHECK(max_abs_diff(c3, sig.level(TreeSymbol::Chain3, 0.0, 1.0, 1.0)) < 1e-7);

    Tensor cv = conv3(sig, TreeSymbol::Vee, 0.0, 1.0, 1.0, unit3, tensor_mode());
    CHECK(max_abs_diff(cv, sig.level(TreeSymbol::Vee, 0.0, 1.0, 1.0)) < 1e-7);
}

TEST_CASE("second-order convolution with an inner-variable integrand") {
    // k = 1, x = id: integral of r2 over 0 < r2 < r1 < 1 equals 1/6.
    VolterraSignature sig = flat_line_signature();
    Tensor got = conv2(sig, 0.0, 1.0, 1.0,
                       [](double, double r2) { return Tensor::scalar(r2); }, tensor_mode());
    REQUIRE(got.shape() == std::vector<int>{1, 1});
    CHECK(got[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-7));
}

TEST_CASE("upper lift drops its first upper argument") {
    auto y12 = [](double t, double p, double q) { return Tensor::scalar(t + 10.0 * p + 100.0 * q); };
    Eval3Fn g = lift_upper(y12);
    CHECK(g(1.0, 5.0, 7.0, 9.0)[0] == y12(1.0, 7.0, 9.0)[0]);
    CHECK_THROWS_AS((void)lift_upper(Eval2Fn{}), std::invalid_argument);
}

TEST_CASE("composition with a linear function") {
    auto k = Kernel::fractional(0.25);
    auto x = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
    VolterraSignature sig(k, x);
    ControlledPath y = ControlledPath::canonical_lift(sig);
    Tensor slope({1, 1, 1}, {2.0});
    Tensor offset({1, 1}, {0.3});
    SmoothFunction lin = SmoothFunction::linear(1, 1, slope, offset);
    ControlledPath z = compose(lin, y);

    CHECK_FALSE(z.in_d_hat());
    CHECK(z.value_shape() == std::vector<int>{1, 1});
    Tensor v = z.value(0.6, 0.8);
    Tensor want = lin.eval(y.value(0.6, 0.8));
    CHECK(max_abs_diff(v, want) < 1e-15);

    // d1 is constant for a linear map and the lift's dot slot is the identity.
    Tensor zdot = z.dot(0.4, 0.7, 0.5);
    REQUIRE(zdot.shape() == std::vector<int>{1, 1, 1});
    CHECK(zdot[0] == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(z.pair(0.4, 0.7, 0.5, 0.3).max_abs() == 0.0);
    CHECK(z.cherry(0.4, 0.7, 0.5, 0.3).max_abs() < 1e-14);
}

TEST_CASE("composition requires a d-hat bundle") {
    auto value = [](double t, double) { return Tensor({1}, {t}); };
    auto dot = [](double, double, double) { return Tensor({1, 1}, {1.0}); };
    auto slot = [](double, double, double, double) { return Tensor({1, 1, 1}, {0.0}); };
    ControlledPath open_bundle({1}, 1, value, dot, slot, slot, false);
    SmoothFunction s = SmoothFunction::sine(1, 1);
    CHECK_THROWS_AS((void)compose(s, open_bundle), std::invalid_argument);
}

TEST_CASE("remainders of the canonical lift") {
    auto k = Kernel::fractional(0.25);
    auto x = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
    VolterraSignature sig(k, x);
    ControlledPath y = ControlledPath::canonical_lift(sig);

    Tensor ry = remainder_y(sig, y, 0.2, 0.7, 0.9);
    CHECK(ry.max_abs() < 1e-7);

    Tensor rd = remainder_dot(sig, y, 0.2, 0.7, 0.9, 0.8);
    CHECK(rd.max_abs() < 1e-14);
}

TEST_CASE("second-derivative exchange cancels") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int m = 3, d = 2;
    Tensor f2({m, d, m, m});
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < d; ++a)
            for (int j = 0; j < m; ++j)
                for (int kk = j; kk < m; ++kk) {
                    const double v = u(rng);
                    f2.at({i, a, j, kk}) = v;
                    f2.at({i, a, kk, j}) = v;
                }
    Tensor ydot({m, d});
    for (int i = 0; i < m * d; ++i) ydot[i] = u(rng);
    Tensor z1({d});
    for (int b = 0; b < d; ++b) z1[b] = u(rng);
    CHECK(cancellation_residual(f2, ydot, z1) < 1e-10);

    Tensor skew = f2;
    skew.at({0, 0, 0, 1}) += 0.5;
    CHECK(cancellation_residual(skew, ydot, z1) > 1e-3);

    CHECK_THROWS_AS((void)cancellation_residual(ydot, ydot, z1), std::invalid_argument);
}

TEST_CASE("cancellation check on a lifted bundle") {
    auto k = Kernel::fractional(0.25);
    auto x = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
    VolterraSignature sig(k, x);
    ControlledPath y = ControlledPath::canonical_lift(sig);
    SmoothFunction f = SmoothFunction::sine(1, 1);
    CHECK(cancellation_check(sig, y, f, 0.2, 0.7, 0.9) < 1e-10);
}

}  // TEST_SUITE
