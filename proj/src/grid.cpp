#include "volterra/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace volterra {

TimeGrid::TimeGrid(std::vector<double> points, int level)
    : points_(std::move(points)), level_(level) {
    if (points_.size() < 2) throw std::invalid_argument("grid needs at least two points");
    for (size_t i = 1; i < points_.size(); ++i)
        if (!(points_[i] > points_[i - 1]))
            throw std::invalid_argument("grid points must be strictly increasing");
}

TimeGrid TimeGrid::dyadic(double a, double b, int level) {
    if (!(a < b)) throw std::invalid_argument("grid interval requires a < b");
    if (level < 0 || level > 30) throw std::invalid_argument("dyadic level out of range [0,30]");
    const double n = static_cast<double>(1u << level);
    std::vector<double> pts(static_cast<size_t>(n) + 1);
    for (size_t i = 0; i < pts.size(); ++i)
        pts[i] = a + (b - a) * (static_cast<double>(i) / n);
    pts.back() = b;
    return TimeGrid(std::move(pts), level);
}

SimplexIter::SimplexIter(int npoints, int arity, bool allow_boundary)
    : n_(npoints), arity_(arity), boundary_(allow_boundary) {
    if (arity < 1 || arity > 8) throw std::invalid_argument("simplex arity out of range [1,8]");
    if (npoints < arity) {
        if (allow_boundary && arity >= 2 && npoints >= arity - 1)
            in_boundary_phase_ = true;
        else
            done_ = true;
    }
    cur_.resize(static_cast<size_t>(arity));
    for (int k = 0; k < arity; ++k) cur_[static_cast<size_t>(k)] = k;
}

bool SimplexIter::advance_strict(int arity) {
    // Odometer advance over strictly increasing tuples of the given arity.
    int k = arity - 1;
    while (k >= 0) {
        ++cur_[static_cast<size_t>(k)];
        if (cur_[static_cast<size_t>(k)] <= n_ - (arity - k)) {
            for (int j = k + 1; j < arity; ++j)
                cur_[static_cast<size_t>(j)] = cur_[static_cast<size_t>(j - 1)] + 1;
            return true;
        }
        --k;
    }
    return false;
}

bool SimplexIter::next(std::vector<int>& out) {
    if (done_) return false;
    if (fresh_) {
        fresh_ = false;
        if (!in_boundary_phase_) {
            out.assign(cur_.begin(), cur_.end());
            return true;
        }
    } else {
        const int arity = in_boundary_phase_ ? arity_ - 1 : arity_;
        if (!advance_strict(arity)) {
            if (!in_boundary_phase_ && boundary_ && arity_ >= 2 && n_ >= arity_ - 1) {
                in_boundary_phase_ = true;
                for (int k = 0; k < arity_ - 1; ++k) cur_[static_cast<size_t>(k)] = k;
            } else {
                done_ = true;
                return false;
            }
        }
    }
    if (in_boundary_phase_) {
        out.assign(cur_.begin(), cur_.begin() + (arity_ - 1));
        out.push_back(out.back());
    } else {
        out.assign(cur_.begin(), cur_.end());
    }
    return true;
}

std::vector<std::vector<int>> simplex_tuples(int npoints, int arity, bool allow_boundary) {
    SimplexIter it(npoints, arity, allow_boundary);
    std::vector<std::vector<int>> all;
    std::vector<int> t;
    while (it.next(t)) all.push_back(t);
    return all;
}

}  // namespace volterra
