#include "doctest.h"
#include "volterra/grid.hpp"
#include "volterra/tensor.hpp"

#include <cmath>
#include <vector>

using namespace volterra;

TEST_SUITE("grid") {

TEST_CASE("dyadic point placement") {
    TimeGrid g0 = TimeGrid::dyadic(0.0, 1.0, 0);
    REQUIRE(g0.size() == 2);
    CHECK(g0[0] == 0.0);
    CHECK(g0[1] == 1.0);

    TimeGrid g2 = TimeGrid::dyadic(0.0, 1.0, 2);
    REQUIRE(g2.size() == 5);
    const double want[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) CHECK(g2[i] == want[i]);

    TimeGrid h = TimeGrid::dyadic(0.0, 2.0, 1);
    REQUIRE(h.size() == 3);
    CHECK(h[1] == 1.0);
    CHECK(h[2] == 2.0);
}

TEST_CASE("refinement shares nodes bit for bit") {
    TimeGrid coarse = TimeGrid::dyadic(0.3, 1.7, 3);
    TimeGrid fine = TimeGrid::dyadic(0.3, 1.7, 5);
    for (int i = 0; i < coarse.size(); ++i) CHECK(coarse[i] == fine[4 * i]);
}

TEST_CASE("simplex tuples") {
    auto pairs = simplex_tuples(3, 2, false);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0] == std::vector<int>{0, 1});
    CHECK(pairs[1] == std::vector<int>{0, 2});
    CHECK(pairs[2] == std::vector<int>{1, 2});

    auto triples = simplex_tuples(3, 3, false);
    REQUIRE(triples.size() == 1);
    CHECK(triples[0] == std::vector<int>{0, 1, 2});

    CHECK(simplex_tuples(2, 3, false).empty());
}

TEST_CASE("boundary tuples extend the strict ones") {
    auto strict = simplex_tuples(4, 3, false);
    auto with_boundary = simplex_tuples(4, 3, true);
    CHECK(with_boundary.size() > strict.size());
    for (const auto& tup : with_boundary) {
        REQUIRE(tup.size() == 3);
        CHECK(tup[0] < tup[1]);
        CHECK(tup[1] <= tup[2]);
    }
    // every strict tuple is present
    for (const auto& tup : strict) {
        bool found = false;
        for (const auto& cand : with_boundary) found = found || cand == tup;
        CHECK(found);
    }
}

TEST_CASE("delta kills additive increments") {
    auto g = [](double s, double t) { return Tensor::scalar(std::sin(t) - std::sin(s)); };
    for (double u : {0.2, 0.5, 0.9}) {
        Tensor r = delta(g, 0.1, u, 1.3);
        CHECK(std::abs(r[0]) < 1e-15);
    }
}

TEST_CASE("delta of a square increment") {
    auto g = [](double s, double t) { return (t - s) * (t - s); };
    CHECK(delta_scalar(g, 0.0, 0.5, 1.0) == doctest::Approx(0.5));
}

}  // TEST_SUITE
