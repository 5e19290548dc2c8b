#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/driver.hpp"
#include "volterra/grid.hpp"
#include "volterra/kernel.hpp"
#include "volterra/norms.hpp"
#include "volterra/signature.hpp"
#include "volterra/tensor.hpp"

using namespace volterra;
using TrigComponent = DrivingPath::TrigComponent;

TEST_SUITE("norms") {

TEST_CASE("parameter validation") {
    NormParams p;
    p.alpha = 0.8;
    p.gamma = 0.25;
    CHECK_NOTHROW(p.validate());
    CHECK(p.rho() == doctest::Approx(0.55));
    CHECK(p.etas().size() == 5);
    CHECK(p.zetas().size() == 4);
    for (double z : p.zetas()) CHECK(z < p.rho());

    NormParams bad = p;
    bad.alpha = 0.2;
    bad.gamma = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    NormParams bad_eta = p;
    bad_eta.eta_sweep = {0.0, 1.5};
    CHECK_THROWS_AS(bad_eta.validate(), std::invalid_argument);

    NormParams bad_zeta = p;
    bad_zeta.zeta_sweep = {p.rho()};
    CHECK_THROWS_AS(bad_zeta.validate(), std::invalid_argument);
}

TEST_CASE("upper-constant data has exactly zero mixed part") {
    // z_t^tau = t does not depend on tau, so every (1,2) difference vanishes
    // identically, not just below a tolerance.
    NormParams p;
    p.alpha = 0.8;
    p.gamma = 0.25;
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    auto f = [](double t, double) { return Tensor::scalar(t); };
    NormReport rep = volterra_norm(Delta2Fn(f), p, grid);
    CHECK(rep.family == "v");
    CHECK(rep.grid_level == 3);
    CHECK(rep.norm_1.value > 0.0);
    CHECK(rep.norm_12() == 0.0);
    CHECK(rep.total() == rep.norm_1.value);
    CHECK_FALSE(rep.infinite());
    REQUIRE(rep.part("12") != nullptr);
    CHECK(rep.part("12")->value == 0.0);
    CHECK(rep.part("21") == nullptr);
    CHECK(rep.norm_1.at.t > rep.norm_1.at.s);
}

TEST_CASE("norm scales linearly with the data") {
    NormParams p;
    p.alpha = 0.75;
    p.gamma = 0.2;
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    auto f = [](double t, double tau) { return Tensor::scalar(std::sin(t) * (1.0 + 0.3 * tau)); };
    auto g = [&f](double t, double tau) {
        Tensor v = f(t, tau);
        v *= 2.0;
        return v;
    };
    NormReport a = volterra_norm(Delta2Fn(f), p, grid);
    NormReport b = volterra_norm(Delta2Fn(g), p, grid);
    CHECK(b.norm_1.value == doctest::Approx(2.0 * a.norm_1.value).epsilon(1e-12));
    CHECK(b.norm_12() == doctest::Approx(2.0 * a.norm_12()).epsilon(1e-12));
}

TEST_CASE("remainder-style overload on zero data") {
    NormParams p;
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    auto f = [](double, double, double) { return Tensor::scalar(0.0); };
    NormReport rep = volterra_norm(Delta3Fn(f), p, grid);
    CHECK(rep.family == "v3");
    CHECK(rep.total() == 0.0);
    CHECK_FALSE(rep.infinite());
}

TEST_CASE("two-upper and three-upper part layout") {
    NormParams p;
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    auto u2 = [](double t, double a, double b) { return Tensor::scalar(t + a - b); };
    NormReport w2 = w_norm(W2Fn(u2), p, grid);
    CHECK(w2.family == "w2");
    REQUIRE(w2.parts.size() == 2);
    CHECK(w2.parts[0].first == "12>");
    CHECK(w2.parts[1].first == "12<");
    CHECK(w2.total() >= w2.norm_1.value);

    auto u3 = [](double t, double a, double b, double c) {
        return Tensor::scalar(std::cos(t) + a * b - c);
    };
    NormReport w3 = w_norm(W3Fn(u3), p, grid);
    CHECK(w3.family == "w3");
    REQUIRE(w3.parts.size() == 6);
    CHECK(w3.part("12>") != nullptr);
    CHECK(w3.part("13<") != nullptr);
    CHECK(w3.part("23>") != nullptr);
    CHECK_FALSE(w3.infinite());

    auto r2 = [](double, double, double, double) { return Tensor::scalar(0.0); };
    NormReport wi = w_norm_increment(W2IncrementFn(r2), p, grid);
    CHECK(wi.family == "w2i");
    CHECK(wi.total() == 0.0);
}

TEST_CASE("grid size limits are enforced") {
    NormParams p;
    auto f = [](double t, double) { return Tensor::scalar(t); };
    TimeGrid big = TimeGrid::dyadic(0.0, 1.0, 8);
    CHECK_THROWS_AS((void)volterra_norm(Delta2Fn(f), p, big), std::invalid_argument);
    auto u2 = [](double, double, double) { return Tensor::scalar(0.0); };
    TimeGrid mid = TimeGrid::dyadic(0.0, 1.0, 6);
    CHECK_THROWS_AS((void)w_norm(W2Fn(u2), p, mid), std::invalid_argument);
}

TEST_CASE("embedding audit validates its parameter pair") {
    NormParams fine;
    fine.alpha = 0.8;
    fine.gamma = 0.25;
    NormParams coarse = fine;
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    auto f = [](double t, double tau) { return Tensor::scalar(t * (1.0 + tau)); };

    NormParams above = fine;
    above.alpha = 0.9;
    CHECK_THROWS_AS((void)embedding_audit(Delta2Fn(f), fine, above, grid), std::invalid_argument);
    NormParams off_gamma = fine;
    off_gamma.alpha = 0.7;
    off_gamma.gamma = 0.2;
    CHECK_THROWS_AS((void)embedding_audit(Delta2Fn(f), fine, off_gamma, grid),
                    std::invalid_argument);

    EmbeddingAudit same = embedding_audit(Delta2Fn(f), fine, coarse, grid);
    CHECK(same.tuples_checked > 0);
    CHECK(same.violations == 0);
    CHECK(same.t_factor == doctest::Approx(1.0));
}

TEST_CASE("embedding audit on first-level data") {
    auto k = Kernel::fractional(0.25);
    std::vector<TrigComponent> comps = {{"sin", 1.0, 1.0, 0.0}};
    auto x = DrivingPath::trig(comps, 1.0, 0.8);
    VolterraSignature sig(k, x);
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 3);
    auto f = [&sig](double t, double tau) { return sig.level1(0.0, t, tau); };

    NormParams fine;
    fine.alpha = 0.8;
    fine.gamma = 0.25;
    NormParams coarse = fine;
    coarse.alpha = 0.7;

    EmbeddingAudit audit = embedding_audit(Delta2Fn(f), fine, coarse, grid);
    CHECK(audit.tuples_checked > 0);
    CHECK(audit.violations == 0);
    CHECK(audit.chain_checked > 0);
    CHECK(audit.chain_violations == 0);
    CHECK(audit.lhs > 0.0);
    CHECK(audit.rhs > 0.0);
}

TEST_CASE("constant bundle has zero controlled norm") {
    auto k = Kernel::constant();
    auto x = DrivingPath::piecewise_linear({0.0, 1.0}, {0.0, 1.0}, 1, 1.0);
    VolterraSignature sig(k, x);
    ControlledPath y = ControlledPath::constant(Tensor::scalar(0.7), 1);
    NormParams p;
    p.alpha = 0.8;
    p.gamma = 0.0;
    TimeGrid grid = TimeGrid::dyadic(0.0, 1.0, 2);
    ControlledNormBreakdown br = controlled_norm_breakdown(y, sig, p, grid);
    CHECK(br.cherry == 0.0);
    CHECK(br.pair == 0.0);
    CHECK(br.remainder_y < 1e-12);
    CHECK(br.remainder_dot < 1e-12);
    CHECK(controlled_norm(y, sig, p, grid) < 1e-12);
}

}  // TEST_SUITE
