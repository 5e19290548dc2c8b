#include "doctest.h"
#include "volterra/tensor.hpp"

#include <stdexcept>

using namespace volterra;

TEST_SUITE("tensor") {

TEST_CASE("construction and shapes") {
    Tensor s = Tensor::scalar(3.5);
    CHECK(s.rank() == 0);
    CHECK(s.size() == 1);
    CHECK(s[0] == 3.5);

    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.rank() == 2);
    CHECK(z.size() == 6);
    CHECK(z.max_abs() == 0.0);

    Tensor id = Tensor::identity(3);
    CHECK(id.at({0, 0}) == 1.0);
    CHECK(id.at({1, 0}) == 0.0);
    CHECK(id.at({2, 2}) == 1.0);
}

TEST_CASE("row-major indexing") {
    Tensor a({2, 3});
    for (int i = 0; i < 6; ++i) a[i] = i;
    CHECK(a.at({0, 2}) == 2.0);
    CHECK(a.at({1, 0}) == 3.0);
    CHECK(a.at({1, 2}) == 5.0);
}

TEST_CASE("arithmetic and axpy") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {10.0, 20.0});
    Tensor c = a + b;
    CHECK(c[0] == 11.0);
    c -= a;
    CHECK(c[1] == 20.0);
    c *= 0.5;
    CHECK(c[0] == 5.0);
    c.axpy(2.0, a);
    CHECK(c[0] == 7.0);
    CHECK(c[1] == 14.0);
}

TEST_CASE("outer product concatenates shapes") {
    Tensor a({2}, {1.0, 2.0});
    Tensor b({3}, {1.0, 10.0, 100.0});
    Tensor o = outer(a, b);
    REQUIRE(o.shape() == std::vector<int>{2, 3});
    CHECK(o.at({0, 1}) == 10.0);
    CHECK(o.at({1, 2}) == 200.0);
}

TEST_CASE("apply contracts trailing indices") {
    // matrix-vector
    Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor v({3}, {1.0, 0.0, -1.0});
    Tensor mv = apply(m, v);
    REQUIRE(mv.shape() == std::vector<int>{2});
    CHECK(mv[0] == doctest::Approx(-2.0));
    CHECK(mv[1] == doctest::Approx(-2.0));

    // rank-3 map against rank-2 argument: full double contraction
    Tensor t({2, 2, 2});
    for (int i = 0; i < 8; ++i) t[i] = i;
    Tensor arg({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor out = apply(t, arg);
    REQUIRE(out.shape() == std::vector<int>{2});
    // out[i] = sum_{j,k} t[i,j,k] arg[j,k]
    CHECK(out[0] == doctest::Approx(0 * 1 + 1 * 2 + 2 * 3 + 3 * 4));
    CHECK(out[1] == doctest::Approx(4 * 1 + 5 * 2 + 6 * 3 + 7 * 4));
}

TEST_CASE("dot and max_abs_diff") {
    Tensor a({2}, {3.0, 4.0});
    Tensor b({2}, {1.0, -1.0});
    CHECK(dot(a, b) == doctest::Approx(-1.0));
    CHECK(max_abs_diff(a, b) == doctest::Approx(5.0));
}

TEST_CASE("finite check") {
    Tensor a({2}, {1.0, 2.0});
    CHECK(a.all_finite());
    a[1] = 1.0 / 0.0;
    CHECK(!a.all_finite());
}

TEST_CASE("shape mismatch throws") {
    Tensor a({2});
    Tensor b({3});
    CHECK_THROWS_AS(a += b, std::invalid_argument);
}

}  // TEST_SUITE
