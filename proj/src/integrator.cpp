#include "volterra/integrator.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "volterra/errors.hpp"
#include "volterra/parallel.hpp"

namespace volterra {

namespace {

std::vector<int> integral_shape(const VolterraSignature& sig, const ControlledPath& y) {
    if (y.driver_dim() != sig.dim())
        throw std::invalid_argument(
            "rough integral: controlled path and signature disagree on the driver dimension");
    const auto& vs = y.value_shape();
    if (vs.empty() || vs.back() != sig.dim())
        throw std::invalid_argument(
            "rough integral: the integrand's value shape must end in the driver dimension");
    return {vs.begin(), vs.end() - 1};
}

SewingExponents integral_exponents(const VolterraSignature& sig, const IntegrateOptions& opts) {
    const double alpha = opts.alpha > 0.0 ? opts.alpha : sig.path().alpha_hint();
    const double gamma = sig.kernel().order();
    const double rho = alpha - gamma;
    if (!(rho > 0.25)) {
        std::ostringstream msg;
        msg << "rough integral: alpha - gamma = " << rho << " (alpha = " << alpha
            << ", gamma = " << gamma << ") must exceed 1/4";
        throw ExponentError(msg.str());
    }
    SewingExponents e;
    e.beta = 4.0 * rho + gamma;
    e.kappa = std::clamp(gamma, 0.05, 0.94);
    e.theta = 0.0;
    e.alpha = alpha;
    e.gamma = gamma;
    e.validate(false);
    return e;
}

// out[o] = sum_a w[o * d + a] fiber[a]; w is row-major with trailing index d.
void contract_fiber(const Tensor& w, const double* fiber, int d, double* out) {
    const int n = w.size() / d;
    const double* src = w.data();
    for (int o = 0; o < n; ++o) {
        double acc = 0.0;
        for (int a = 0; a < d; ++a) acc += src[o * d + a] * fiber[a];
        out[o] = acc;
    }
}

// Probe offsets (fractions of the cell, strictly ordered) used to detect
// structurally constant components: a recentred integrand that is exactly zero
// at all four probe tuples is dropped, since its correction integral vanishes.
constexpr std::array<std::array<double, 3>, 4> kProbes = {{
    {0.83, 0.57, 0.31},
    {0.95, 0.50, 0.05},
    {0.62, 0.44, 0.21},
    {0.99, 0.90, 0.80},
}};

template <typename DiffAt>
bool probes_vanish(const DiffAt& diff_at) {
    for (const auto& p : kProbes)
        if (diff_at(p).max_abs() != 0.0) return false;
    return true;
}

struct BitKey {
    std::uint64_t t = 0;
    std::uint64_t tau = 0;
    bool operator==(const BitKey&) const = default;
};

struct BitKeyHash {
    std::size_t operator()(const BitKey& k) const {
        std::uint64_t h = (k.t ^ (k.tau << 31) ^ (k.tau >> 17)) * 0x9e3779b97f4a7c15ull;
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

}  // namespace

Tensor integral_germ(const VolterraSignature& sig, const ControlledPath& y, double u, double v,
                     double tau, const IntegrateOptions& opts) {
    const std::vector<int> out_shape = integral_shape(sig, y);
    if (!(v > u)) return Tensor::zeros(out_shape);
    if (v > tau + 1e-12 * std::max(1.0, std::abs(tau)))
        throw std::invalid_argument("integral germ: needs u <= v <= tau");
    const Kernel& k = sig.kernel();
    const DrivingPath& x = sig.path();
    const int d = sig.dim();
    const double h = v - u;

    const Tensor y0 = y.value(u, u);
    const Tensor d0 = y.dot(u, u, u);
    const Tensor c0 = y.cherry(u, u, u, u);
    const bool with_pair = !y.in_d_hat();

    Tensor xi = apply(y0, sig.level1(u, v, tau));
    xi += apply(d0, sig.level(TreeSymbol::Chain2, u, v, tau));
    xi += apply(c0, sig.level(TreeSymbol::Chain3, u, v, tau));
    Tensor p0;
    if (with_pair) {
        p0 = y.pair(u, u, u, u);
        xi += apply(p0, sig.level(TreeSymbol::Vee, u, v, tau));
    }

    if (!probes_vanish([&](const std::array<double, 3>& p) {
            Tensor w = y.value(u, u + p[0] * h);
            w -= y0;
            return w;
        })) {
        xi += kernel_weighted_integral(
            k, x, u, v, tau, out_shape,
            [&](double r, const double* fiber, double* out) {
                Tensor w = y.value(u, r);
                w -= y0;
                contract_fiber(w, fiber, d, out);
            },
            opts.quad);
    }

    if (!probes_vanish([&](const std::array<double, 3>& p) {
            Tensor w = y.dot(u, u + p[0] * h, u + p[1] * h);
            w -= d0;
            return w;
        })) {
        xi += kernel_weighted_integral(
            k, x, u, v, tau, out_shape,
            [&](double r1, const double* fiber, double* out) {
                Tensor inner = kernel_weighted_integral(
                    k, x, u, r1, r1, y.value_shape(),
                    [&](double r2, const double* fiber2, double* out2) {
                        Tensor w = y.dot(u, r1, r2);
                        w -= d0;
                        contract_fiber(w, fiber2, d, out2);
                    },
                    opts.quad);
                contract_fiber(inner, fiber, d, out);
            },
            opts.quad);
    }

    if (!probes_vanish([&](const std::array<double, 3>& p) {
            Tensor w = y.cherry(u, u + p[0] * h, u + p[1] * h, u + p[2] * h);
            w -= c0;
            return w;
        })) {
        xi += kernel_weighted_integral(
            k, x, u, v, tau, out_shape,
            [&](double r1, const double* f1, double* out) {
                Tensor mid = kernel_weighted_integral(
                    k, x, u, r1, r1, y.value_shape(),
                    [&](double r2, const double* f2, double* out2) {
                        Tensor in3 = kernel_weighted_integral(
                            k, x, u, r2, r2, y.dot_shape(),
                            [&](double r3, const double* f3, double* out3) {
                                Tensor w = y.cherry(u, r1, r2, r3);
                                w -= c0;
                                contract_fiber(w, f3, d, out3);
                            },
                            opts.quad);
                        contract_fiber(in3, f2, d, out2);
                    },
                    opts.quad);
                contract_fiber(mid, f1, d, out);
            },
            opts.quad);
    }

    if (with_pair && !probes_vanish([&](const std::array<double, 3>& p) {
            const double r1 = u + p[0] * h;
            Tensor w = y.pair(u, r1, u + p[1] * (r1 - u), u + p[2] * (r1 - u));
            w -= p0;
            return w;
        })) {
        xi += kernel_weighted_integral(
            k, x, u, v, tau, out_shape,
            [&](double r1, const double* f1, double* out) {
                Tensor mid = kernel_weighted_integral(
                    k, x, u, r1, r1, y.value_shape(),
                    [&](double l1, const double* fb, double* outb) {
                        Tensor in3 = kernel_weighted_integral(
                            k, x, u, r1, r1, y.dot_shape(),
                            [&](double l2, const double* fc, double* outc) {
                                Tensor w = y.pair(u, r1, l1, l2);
                                w -= p0;
                                contract_fiber(w, fc, d, outc);
                            },
                            opts.quad);
                        contract_fiber(in3, fb, d, outb);
                    },
                    opts.quad);
                contract_fiber(mid, f1, d, out);
            },
            opts.quad);
    }

    return xi;
}

RoughIntegralValue rough_integral(const VolterraSignature& sig, const ControlledPath& y, double s,
                                  double t, double tau, double tol, const IntegrateOptions& opts) {
    (void)integral_shape(sig, y);
    const SewingExponents exps = integral_exponents(sig, opts);
    if (!(s <= t)) throw std::invalid_argument("rough integral: needs s <= t");
    SewOptions sopts;
    sopts.tol = tol;
    sopts.max_level = opts.max_level;
    sopts.threads = opts.threads;
    SewResult res = sew_single(
        [&](double a, double b, double tt) { return integral_germ(sig, y, a, b, tt, opts); }, exps,
        s, t, tau, sopts);
    return {std::move(res.value), std::move(res.diagnostics)};
}

RoughIntegralResult integrate_to_controlled(const VolterraSignature& sig, const ControlledPath& y,
                                            const TimeGrid& grid, double tol,
                                            const IntegrateOptions& opts) {
    const std::vector<int> out_shape = integral_shape(sig, y);
    (void)integral_exponents(sig, opts);
    if (grid.size() < 2)
        throw std::invalid_argument("integrate: the grid needs at least two points");
    const double t0 = grid.a();
    const int d = sig.dim();

    struct WMemo {
        std::shared_mutex mutex;
        std::unordered_map<BitKey, Tensor, BitKeyHash> table;
    };
    auto memo = std::make_shared<WMemo>();
    IntegrateOptions serial = opts;
    serial.threads = 1;

    std::function<Tensor(double, double)> w = [sig, y, t0, tol, serial,
                                               memo](double t, double tau) {
        const BitKey key{std::bit_cast<std::uint64_t>(t), std::bit_cast<std::uint64_t>(tau)};
        {
            std::shared_lock lock(memo->mutex);
            auto it = memo->table.find(key);
            if (it != memo->table.end()) return it->second;
        }
        Tensor value = rough_integral(sig, y, t0, t, tau, tol, serial).value;
        std::unique_lock lock(memo->mutex);
        if (memo->table.size() >= 65536) memo->table.clear();
        return memo->table.try_emplace(key, std::move(value)).first->second;
    };

    // Full-interval diagonal run, seeded into the memo so the matching sample
    // is free.
    IntegrateOptions full = opts;
    RoughIntegralValue diag = rough_integral(sig, y, t0, grid.b(), grid.b(), tol, full);
    {
        const BitKey key{std::bit_cast<std::uint64_t>(grid.b()),
                         std::bit_cast<std::uint64_t>(grid.b())};
        std::unique_lock lock(memo->mutex);
        memo->table.try_emplace(key, diag.value);
    }

    std::vector<std::pair<double, double>> tasks;
    for (int i = 0; i < grid.size(); ++i) tasks.emplace_back(grid[i], grid[i]);
    for (double slice : opts.tau_slices) {
        if (!(slice >= t0))
            throw std::invalid_argument("integrate: tau slices must not precede the grid origin");
        for (int i = 0; i < grid.size(); ++i)
            if (grid[i] <= slice + 1e-12 * std::max(1.0, std::abs(slice)))
                tasks.emplace_back(std::min(grid[i], slice), slice);
    }
    std::vector<IntegralSample> samples(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), opts.threads, [&](int i, int) {
        const auto [t, tau] = tasks[static_cast<size_t>(i)];
        samples[static_cast<size_t>(i)] = {t, tau, w(t, tau)};
    });

    ControlledPath::DotFn dotf = [y](double t, double /*tau*/, double p) { return y.value(t, p); };
    ControlledPath::SlotFn cherryf = [y](double t, double /*tau*/, double q, double p) {
        return y.dot(t, q, p);
    };
    std::vector<int> pair_shape = out_shape;
    pair_shape.push_back(d);
    pair_shape.push_back(d);
    Tensor zero_pair = Tensor::zeros(pair_shape);
    ControlledPath::SlotFn pairf = [zero_pair](double, double, double, double) {
        return zero_pair;
    };
    ControlledPath as_controlled(out_shape, d, w, std::move(dotf), std::move(cherryf),
                                 std::move(pairf), true);

    RoughIntegralResult out;
    out.w = std::move(w);
    out.as_controlled = std::move(as_controlled);
    out.diagnostics = std::move(diag.diagnostics);
    out.samples = std::move(samples);
    return out;
}

}  // namespace volterra
