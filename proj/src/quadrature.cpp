#include "volterra/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "volterra/driver.hpp"
#include "volterra/errors.hpp"
#include "volterra/kernel.hpp"

namespace volterra {

namespace {

constexpr double kTMax = 4.8;
constexpr int kMaxTable = 12;

DeNode make_node(double t) {
    // u = tanh((pi/2) sinh t); offsets via e^{-2s} to avoid cancellation near |u|=1.
    const double at = std::abs(t);
    const double s = 0.5 * std::numbers::pi * std::sinh(at);
    const double e = std::exp(-2.0 * s);
    const double denom = 1.0 + e;
    const double u_abs = (1.0 - e) / denom;
    const double near = 2.0 * e / denom;         // 1 - |u|
    const double far = 2.0 / denom;              // 1 + |u|
    const double w = 0.5 * std::numbers::pi * std::cosh(at) * (4.0 * e) / (denom * denom);
    DeNode n;
    if (t >= 0.0) {
        n.u = u_abs;
        n.one_minus = near;
        n.one_plus = far;
    } else {
        n.u = -u_abs;
        n.one_minus = far;
        n.one_plus = near;
    }
    n.weight = w;
    return n;
}

std::vector<std::vector<DeNode>> build_tables() {
    std::vector<std::vector<DeNode>> tables(kMaxTable + 1);
    for (int level = 0; level <= kMaxTable; ++level) {
        const double h = std::ldexp(1.0, -level);
        std::vector<DeNode>& nodes = tables[level];
        if (level == 0) {
            const int kmax = static_cast<int>(kTMax / h);
            for (int k = -kmax; k <= kmax; ++k) nodes.push_back(make_node(k * h));
        } else {
            const int kmax = static_cast<int>(kTMax / h);
            for (int k = -kmax; k <= kmax; ++k)
                if (k % 2 != 0) nodes.push_back(make_node(k * h));
        }
    }
    return tables;
}

}  // namespace

const std::vector<DeNode>& de_nodes_new_at_level(int level) {
    if (level < 0 || level > kMaxTable) throw std::invalid_argument("quadrature level out of range");
    static const std::vector<std::vector<DeNode>> tables = build_tables();
    return tables[level];
}

DeResult de_integrate(const std::vector<int>& shape, const DeIntegrand& f, double a, double b,
                      const DeOptions& opts) {
    if (!(a <= b)) throw std::invalid_argument("quadrature interval requires a <= b");
    if (opts.min_level < 0 || opts.max_level > kMaxTable || opts.min_level > opts.max_level)
        throw std::invalid_argument("quadrature levels out of range");

    DeResult res;
    res.value = Tensor(shape);
    if (a == b) return res;

    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const size_t n = res.value.size();
    Tensor sum(shape);   // cumulative weighted node sum, no spacing factor
    Tensor buf(shape);
    Tensor prev(shape);  // I at the previous level

    auto add_level = [&](int level) {
        for (const DeNode& node : de_nodes_new_at_level(level)) {
            const double r = mid + half * node.u;
            const double du = half * node.one_minus;
            const double dl = half * node.one_plus;
            f(r, du, dl, buf.data());
            const double w = node.weight;
            for (size_t i = 0; i < n; ++i) sum.data()[i] += w * buf.data()[i];
        }
    };

    for (int level = 0; level <= opts.min_level; ++level) add_level(level);
    const double h0 = std::ldexp(1.0, -opts.min_level);
    res.value = sum;
    res.value *= half * h0;
    res.level = opts.min_level;

    for (int level = opts.min_level + 1; level <= opts.max_level; ++level) {
        prev = res.value;
        add_level(level);
        res.value = sum;
        res.value *= half * std::ldexp(1.0, -level);
        res.level = level;
        res.err = max_abs_diff(res.value, prev);
        if (res.err <= opts.tol * std::max(1.0, res.value.max_abs())) {
            res.converged = true;
            return res;
        }
    }
    res.converged = res.err <= opts.tol * std::max(1.0, res.value.max_abs());
    return res;
}

double de_integrate_scalar(const std::function<double(double, double, double)>& f, double a,
                           double b, const DeOptions& opts) {
    const DeIntegrand wrap = [&f](double r, double du, double dl, double* out) {
        out[0] = f(r, du, dl);
    };
    return de_integrate({}, wrap, a, b, opts).value.at({});
}

Tensor kernel_weighted_integral(const Kernel& k, const DrivingPath& x, double a, double b,
                                double tau, const std::vector<int>& shape, const NodeFill& fill,
                                const DeOptions& opts, double stall_tol) {
    Tensor total(shape);
    if (!(b > a)) return total;

    // Piece boundaries: the driver's sample times restore smoothness of x'
    // inside every quadrature span.
    std::vector<double> cuts{a};
    if (x.kind() == DrivingPath::Kind::PiecewiseLinear) {
        const std::vector<double>& times = x.times();
        auto lo = std::upper_bound(times.begin(), times.end(), a);
        auto hi = std::lower_bound(times.begin(), times.end(), b);
        cuts.insert(cuts.end(), lo, hi);
    }
    cuts.push_back(b);

    const int d = x.dim();
    std::vector<double> deriv(static_cast<size_t>(d));
    std::vector<double> fiber(static_cast<size_t>(d));
    for (size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p];
        const double hi = cuts[p + 1];
        if (!(hi > lo)) continue;
        const double tau_gap = tau - hi;
        const DeIntegrand integrand = [&, tau_gap](double r, double du, double, double* out) {
            x.derivative_into(r, deriv.data());
            const double kv = k.eval_dist(tau_gap + du);
            for (int c = 0; c < d; ++c) fiber[static_cast<size_t>(c)] = kv * deriv[static_cast<size_t>(c)];
            fill(r, fiber.data(), out);
        };
        DeResult res = de_integrate(shape, integrand, lo, hi, opts);
        if (!res.converged && res.err > stall_tol * std::max(1.0, res.value.max_abs()))
            throw QuadratureNotConverged("kernel-weighted integral stalled at level " +
                                         std::to_string(res.level));
        total += res.value;
    }
    return total;
}

}  // namespace volterra
