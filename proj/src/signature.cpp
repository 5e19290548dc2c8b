#include "volterra/signature.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/errors.hpp"
#include "volterra/quadrature.hpp"

namespace volterra {

int tree_vertices(TreeSymbol sigma) {
    switch (sigma) {
        case TreeSymbol::Dot: return 1;
        case TreeSymbol::Chain2: return 2;
        case TreeSymbol::Chain3: return 3;
        case TreeSymbol::Vee: return 3;
        case TreeSymbol::Pair: return 2;
    }
    throw std::invalid_argument("unknown tree symbol");
}

int tree_rank(TreeSymbol sigma) { return tree_vertices(sigma); }

std::string tree_name(TreeSymbol sigma) {
    switch (sigma) {
        case TreeSymbol::Dot: return "dot";
        case TreeSymbol::Chain2: return "cherry";
        case TreeSymbol::Chain3: return "chain3";
        case TreeSymbol::Vee: return "vee";
        case TreeSymbol::Pair: return "pair";
    }
    throw std::invalid_argument("unknown tree symbol");
}

TreeSymbol tree_symbol_from(std::string_view name) {
    std::string low(name);
    std::transform(low.begin(), low.end(), low.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (low == "dot" || low == "z1") return TreeSymbol::Dot;
    if (low == "cherry" || low == "chain2" || low == "z2") return TreeSymbol::Chain2;
    if (low == "chain3" || low == "z3") return TreeSymbol::Chain3;
    if (low == "vee") return TreeSymbol::Vee;
    if (low == "pair" || low == "square") return TreeSymbol::Pair;
    throw std::invalid_argument("unknown tree symbol: " + std::string(name));
}

const std::array<TreeSymbol, 5>& all_tree_symbols() {
    static const std::array<TreeSymbol, 5> syms{TreeSymbol::Dot, TreeSymbol::Chain2,
                                               TreeSymbol::Chain3, TreeSymbol::Vee,
                                               TreeSymbol::Pair};
    return syms;
}

namespace {

std::uint64_t dbits(double v) { return std::bit_cast<std::uint64_t>(v); }

struct CacheKey {
    std::uint8_t sigma;
    std::uint64_t s;
    std::uint64_t t;
    std::uint64_t tau;
    bool operator==(const CacheKey&) const = default;
};

struct CacheKeyHash {
    std::size_t operator()(const CacheKey& k) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull ^ k.sigma;
        const auto mix = [&h](std::uint64_t v) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        };
        mix(k.s);
        mix(k.t);
        mix(k.tau);
        return static_cast<std::size_t>(h);
    }
};

std::vector<int> block_shape(TreeSymbol sigma, int d) {
    return std::vector<int>(static_cast<std::size_t>(tree_rank(sigma)), d);
}

void check_ordered(double s, double t, double tau) {
    if (!std::isfinite(s) || !std::isfinite(t) || !std::isfinite(tau))
        throw std::invalid_argument("signature arguments must be finite");
    if (!(s <= t)) throw std::invalid_argument("signature arguments need s <= t");
    const double slack = 1e-9 * std::max(1.0, std::abs(tau));
    if (t > tau + slack) throw std::invalid_argument("signature arguments need t <= tau");
}

}  // namespace

struct VolterraSignature::Impl {
    Kernel kernel;
    DrivingPath path;
    QuadratureSpec quad;
    bool exact_z1;

    mutable std::shared_mutex mutex;
    mutable std::unordered_map<CacheKey, Tensor, CacheKeyHash> cache;

    Impl(Kernel k, DrivingPath x, QuadratureSpec q)
        : kernel(std::move(k)),
          path(std::move(x)),
          quad(q),
          exact_z1(path.kind() == DrivingPath::Kind::PiecewiseLinear && kernel.has_primitive()) {}

    DeOptions de_opts() const { return DeOptions{quad.min_level, quad.max_level, quad.tol}; }

    // z^{dot,tau}_{ts} without the cache. Piecewise-linear drivers over a kernel
    // with closed-form moments reduce to a segment sum; every other combination
    // runs the kernel-weighted quadrature.
    Tensor z1_raw(double s, double t, double tau) const {
        const int d = path.dim();
        Tensor out(block_shape(TreeSymbol::Dot, d));
        if (!(t > s)) return out;
        if (exact_z1) {
            const std::vector<double>& times = path.times();
            int seg = path.segment_of(s);
            double lo = s;
            while (lo < t && seg < path.segment_count()) {
                const double hi = std::min(t, times[static_cast<std::size_t>(seg) + 1]);
                if (hi > lo) {
                    const double m0 = kernel.moment0(tau, lo, hi);
                    for (int c = 0; c < d; ++c) out[c] += path.segment_slope(seg, c) * m0;
                }
                lo = hi;
                ++seg;
            }
            return out;
        }
        return kernel_weighted_integral(
            kernel, path, s, t, tau, block_shape(TreeSymbol::Dot, d),
            [d](double, const double* fib, double* o) {
                for (int c = 0; c < d; ++c) o[c] = fib[c];
            },
            de_opts(), quad.stall_tol);
    }

    Tensor compute(TreeSymbol sigma, double s, double t, double tau) const {
        const int d = path.dim();
        switch (sigma) {
            case TreeSymbol::Dot:
                return z1_raw(s, t, tau);
            case TreeSymbol::Pair: {
                const Tensor z = block(TreeSymbol::Dot, s, t, tau);
                return outer(z, z);
            }
            case TreeSymbol::Chain2:
                return kernel_weighted_integral(
                    kernel, path, s, t, tau, block_shape(sigma, d),
                    [this, d, s](double r, const double* fib, double* o) {
                        const Tensor inner = block(TreeSymbol::Dot, s, r, r);
                        for (int a = 0; a < d; ++a)
                            for (int b = 0; b < d; ++b) o[a * d + b] = fib[a] * inner[b];
                    },
                    de_opts(), quad.stall_tol);
            case TreeSymbol::Chain3:
                return kernel_weighted_integral(
                    kernel, path, s, t, tau, block_shape(sigma, d),
                    [this, d, s](double r, const double* fib, double* o) {
                        const Tensor inner = block(TreeSymbol::Chain2, s, r, r);
                        const int dd = d * d;
                        for (int a = 0; a < d; ++a)
                            for (int bc = 0; bc < dd; ++bc) o[a * dd + bc] = fib[a] * inner[bc];
                    },
                    de_opts(), quad.stall_tol);
            case TreeSymbol::Vee:
                return kernel_weighted_integral(
                    kernel, path, s, t, tau, block_shape(sigma, d),
                    [this, d, s](double r, const double* fib, double* o) {
                        const Tensor c = block(TreeSymbol::Dot, s, r, r);
                        for (int a = 0; a < d; ++a)
                            for (int b = 0; b < d; ++b)
                                for (int e = 0; e < d; ++e)
                                    o[(a * d + b) * d + e] = fib[a] * c[b] * c[e];
                    },
                    de_opts(), quad.stall_tol);
        }
        throw std::invalid_argument("unknown tree symbol");
    }

    // Memoized evaluation. Dot blocks with an exact segment formula are cheaper
    // to recompute than to cache (their upper argument varies continuously
    // inside quadrature loops, which would flood the table); everything else is
    // stored under the exact bit pattern of (s, t, tau).
    Tensor block(TreeSymbol sigma, double s, double t, double tau) const {
        if (!(t > s)) return Tensor(block_shape(sigma, path.dim()));
        if (sigma == TreeSymbol::Dot && exact_z1) return compute(sigma, s, t, tau);
        const CacheKey key{static_cast<std::uint8_t>(sigma), dbits(s), dbits(t), dbits(tau)};
        {
            std::shared_lock lock(mutex);
            auto it = cache.find(key);
            if (it != cache.end()) return it->second;
        }
        Tensor value = compute(sigma, s, t, tau);
        std::unique_lock lock(mutex);
        // Long sweeps touch mostly fresh cells; a flush keeps memory bounded.
        if (cache.size() >= 262144) cache.clear();
        return cache.try_emplace(key, std::move(value)).first->second;
    }
};

VolterraSignature::VolterraSignature(Kernel kernel, DrivingPath path, QuadratureSpec quad)
    : impl_(std::make_shared<Impl>(std::move(kernel), std::move(path), quad)) {
    if (impl_->quad.min_level < 0 || impl_->quad.max_level < impl_->quad.min_level)
        throw std::invalid_argument("quadrature levels must satisfy 0 <= min <= max");
    if (!(impl_->quad.tol > 0.0) || !(impl_->quad.stall_tol > 0.0))
        throw std::invalid_argument("quadrature tolerances must be positive");
}

const Kernel& VolterraSignature::kernel() const { return impl_->kernel; }
const DrivingPath& VolterraSignature::path() const { return impl_->path; }
const QuadratureSpec& VolterraSignature::quad() const { return impl_->quad; }
int VolterraSignature::dim() const { return impl_->path.dim(); }

Tensor VolterraSignature::level(TreeSymbol sigma, double s, double t, double tau) const {
    check_ordered(s, t, tau);
    return impl_->block(sigma, s, t, std::max(tau, t));
}

Tensor VolterraSignature::level1(double s, double t, double tau) const {
    return level(TreeSymbol::Dot, s, t, tau);
}

double VolterraSignature::chen_residual(TreeSymbol sigma, double s, double u, double t,
                                        double tau) const {
    check_ordered(s, u, tau);
    check_ordered(u, t, tau);
    const double tc = std::max(tau, t);
    Tensor lhs = impl_->block(sigma, s, t, tc);
    lhs -= impl_->block(sigma, u, t, tc);
    lhs -= impl_->block(sigma, s, u, tc);

    const int d = impl_->path.dim();
    ConvOptions opts;
    opts.mode = ConvMode::TensorProduct;
    opts.quad = impl_->de_opts();

    // The dot family z^{dot,q}_{us} with q sweeping quadrature nodes is memoized
    // per call; its keys are not grid-aligned, so the shared cache stays out.
    auto memo = std::make_shared<std::unordered_map<std::uint64_t, Tensor>>();
    auto z1_su = [this, s, u, memo](double q) {
        const std::uint64_t key = dbits(q);
        if (auto it = memo->find(key); it != memo->end()) return it->second;
        Tensor v = impl_->z1_raw(s, u, q);
        return memo->emplace(key, std::move(v)).first->second;
    };

    Tensor rhs;
    switch (sigma) {
        case TreeSymbol::Dot:
            rhs = Tensor(block_shape(sigma, d));
            break;
        case TreeSymbol::Pair: {
            const Tensor a = impl_->block(TreeSymbol::Dot, u, t, tc);
            const Tensor b = impl_->block(TreeSymbol::Dot, s, u, tc);
            rhs = outer(a, b) + outer(b, a);
            break;
        }
        case TreeSymbol::Chain2:
            rhs = conv1(*this, u, u, t, tc, z1_su, opts);
            break;
        case TreeSymbol::Chain3:
            rhs = conv1(
                *this, u, u, t, tc,
                [this, s, u](double r) { return impl_->block(TreeSymbol::Chain2, s, u, r); },
                opts);
            rhs += conv2(*this, u, t, tc, [&z1_su](double, double q) { return z1_su(q); }, opts);
            break;
        case TreeSymbol::Vee: {
            auto diag = std::make_shared<std::unordered_map<std::uint64_t, Tensor>>();
            rhs = conv1(
                *this, u, u, t, tc,
                [this, u, &z1_su, diag](double r) {
                    const std::uint64_t key = dbits(r);
                    Tensor cu;
                    if (auto it = diag->find(key); it != diag->end()) {
                        cu = it->second;
                    } else {
                        cu = impl_->block(TreeSymbol::Dot, u, r, r);
                        diag->emplace(key, cu);
                    }
                    const Tensor dv = z1_su(r);
                    return outer(cu, dv) + outer(dv, cu) + outer(dv, dv);
                },
                opts);
            break;
        }
    }
    return max_abs_diff(lhs, rhs);
}

std::size_t VolterraSignature::cache_size() const {
    std::shared_lock lock(impl_->mutex);
    return impl_->cache.size();
}

void VolterraSignature::clear_cache() const {
    std::unique_lock lock(impl_->mutex);
    impl_->cache.clear();
}

}  // namespace volterra
