#pragma once

#include <array>
#include <functional>
#include <vector>

namespace volterra {

// Time grid on [a, b]. Dyadic construction places points by multiplication,
// points[i] = a + (b-a)*(i/2^level), so refinements share nodes bit-for-bit.
class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(std::vector<double> points, int level);

    static TimeGrid dyadic(double a, double b, int level);

    int size() const { return static_cast<int>(points_.size()); }
    double operator[](int i) const { return points_[static_cast<size_t>(i)]; }
    const std::vector<double>& points() const { return points_; }
    int level() const { return level_; }
    double a() const { return points_.front(); }
    double b() const { return points_.back(); }

private:
    std::vector<double> points_;
    int level_ = -1;  // -1 when the grid was not built dyadically
};

// Streams index tuples i_1 < i_2 < ... < i_n over {0, ..., npoints-1} in
// lexicographic order. With allow_boundary, tuples where the last index equals
// the one before it are also produced (tau = t boundary audits).
class SimplexIter {
public:
    SimplexIter(int npoints, int arity, bool allow_boundary);

    // Fills out with the next tuple; returns false when exhausted.
    bool next(std::vector<int>& out);

private:
    int n_;
    int arity_;
    bool boundary_;
    bool in_boundary_phase_ = false;
    bool done_ = false;
    bool fresh_ = true;
    std::vector<int> cur_;

    bool advance_strict(int arity);
};

// Collects all tuples from a SimplexIter; convenient at desk scale.
std::vector<std::vector<int>> simplex_tuples(int npoints, int arity, bool allow_boundary);

// delta_u g_{ts} = g_{ts} - g_{tu} - g_{us} for an increment-style function
// g(lower, upper). Kills additive increments.
template <typename F>
auto delta(F&& g, double s, double u, double t) {
    auto a = g(s, t);
    a -= g(u, t);
    a -= g(s, u);
    return a;
}

inline double delta_scalar(const std::function<double(double, double)>& g, double s, double u,
                           double t) {
    return g(s, t) - g(u, t) - g(s, u);
}

}  // namespace volterra
