#include "volterra/controlled.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "volterra/errors.hpp"
#include "volterra/sewing.hpp"

namespace volterra {

ControlledPath::ControlledPath(std::vector<int> value_shape, int driver_dim, PathFn y, DotFn y_dot,
                               SlotFn y_cherry, SlotFn y_pair, bool in_d_hat)
    : value_shape_(std::move(value_shape)),
      d_(driver_dim),
      y_(std::move(y)),
      y_dot_(std::move(y_dot)),
      y_cherry_(std::move(y_cherry)),
      y_pair_(std::move(y_pair)),
      in_d_hat_(in_d_hat) {
    if (d_ <= 0) throw std::invalid_argument("controlled path: driver dimension must be positive");
    if (!y_ || !y_dot_ || !y_cherry_ || !y_pair_)
        throw std::invalid_argument("controlled path: all four component closures are required");
    for (int n : value_shape_)
        if (n <= 0) throw std::invalid_argument("controlled path: value shape must be positive");
}

std::vector<int> ControlledPath::dot_shape() const {
    std::vector<int> s = value_shape_;
    s.push_back(d_);
    return s;
}

std::vector<int> ControlledPath::slot_shape() const {
    std::vector<int> s = value_shape_;
    s.push_back(d_);
    s.push_back(d_);
    return s;
}

ControlledPath ControlledPath::constant(Tensor c, int driver_dim) {
    std::vector<int> vs = c.shape();
    std::vector<int> ds = vs;
    ds.push_back(driver_dim);
    std::vector<int> ss = ds;
    ss.push_back(driver_dim);
    return ControlledPath(
        vs, driver_dim, [c](double, double) { return c; },
        [ds](double, double, double) { return Tensor(ds); },
        [ss](double, double, double, double) { return Tensor(ss); },
        [ss](double, double, double, double) { return Tensor(ss); }, true);
}

ControlledPath ControlledPath::canonical_lift(const VolterraSignature& sig) {
    const int d = sig.dim();
    const Tensor id = Tensor::identity(d);
    const std::vector<int> ss{d, d, d};
    const bool flat = sig.kernel().family() == KernelFamily::Constant;
    return ControlledPath(
        {d}, d, [sig](double t, double tau) { return sig.level1(0.0, t, tau); },
        [id](double, double, double) { return id; },
        [ss](double, double, double, double) { return Tensor(ss); },
        [ss](double, double, double, double) { return Tensor(ss); }, flat);
}

struct SmoothFunction::Impl {
    int m = 0;
    int d = 0;
    std::string name;
    double bound = 0.0;
    MapFn f, f1, f2, f3, f4;
    mutable std::atomic<bool> probed{false};

    void check_input(const Tensor& y) const {
        if (y.rank() != 1 || y.shape()[0] != m)
            throw std::invalid_argument("smooth function: argument must have shape [m]");
    }

    static std::shared_ptr<Impl> base(int m, int d, std::string name, double bound) {
        if (m <= 0 || d <= 0)
            throw std::invalid_argument("smooth function: dimensions must be positive");
        auto impl = std::make_shared<Impl>();
        impl->m = m;
        impl->d = d;
        impl->name = std::move(name);
        impl->bound = bound;
        return impl;
    }
};

namespace {

std::vector<int> deriv_shape(int m, int d, int level) {
    std::vector<int> s{m, d};
    s.insert(s.end(), static_cast<std::size_t>(level), m);
    return s;
}

// Fills the four derivative levels of a function acting coordinatewise through
// a scalar profile g(y_i) shifted per driver column: f[i][a] = g(y_i, a). The
// supplied g returns the profile value and its first four derivatives.
using ScalarJet = std::array<double, 5>;
SmoothFunction::MapFn diagonal_level(int m, int d, int level,
                                     std::function<ScalarJet(double y, int a)> jet) {
    return [m, d, level, jet = std::move(jet)](const Tensor& y) {
        Tensor out(deriv_shape(m, d, level));
        int stride = 1;
        for (int l = 0; l < level; ++l) stride *= m;
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < d; ++a) {
                const double v = jet(y[i], a)[static_cast<std::size_t>(level)];
                // all derivative slots on the diagonal (j = k = ... = i)
                int idx = (i * d + a) * stride;
                int diag = 0;
                int step = 1;
                for (int l = 0; l < level; ++l) {
                    diag += i * step;
                    step *= m;
                }
                out[idx + diag] = v;
            }
        return out;
    };
}

}  // namespace

SmoothFunction SmoothFunction::constant(int m, int d, Tensor value) {
    if (value.shape() != std::vector<int>{m, d})
        throw std::invalid_argument("constant function: value must have shape [m, d]");
    auto impl = Impl::base(m, d, "constant", value.max_abs());
    impl->f = [value](const Tensor&) { return value; };
    for (int level = 1; level <= 4; ++level) {
        auto zero = [shape = deriv_shape(m, d, level)](const Tensor&) { return Tensor(shape); };
        (level == 1 ? impl->f1 : level == 2 ? impl->f2 : level == 3 ? impl->f3 : impl->f4) = zero;
    }
    SmoothFunction f;
    f.impl_ = impl;
    return f;
}

SmoothFunction SmoothFunction::linear(int m, int d, Tensor slope, Tensor offset) {
    if (slope.shape() != std::vector<int>{m, d, m})
        throw std::invalid_argument("linear function: slope must have shape [m, d, m]");
    if (offset.shape() != std::vector<int>{m, d})
        throw std::invalid_argument("linear function: offset must have shape [m, d]");
    auto impl = Impl::base(m, d, "linear", slope.max_abs() + offset.max_abs());
    impl->f = [slope, offset](const Tensor& y) { return apply(slope, y) + offset; };
    impl->f1 = [slope](const Tensor&) { return slope; };
    for (int level = 2; level <= 4; ++level) {
        auto zero = [shape = deriv_shape(m, d, level)](const Tensor&) { return Tensor(shape); };
        (level == 2 ? impl->f2 : level == 3 ? impl->f3 : impl->f4) = zero;
    }
    SmoothFunction f;
    f.impl_ = impl;
    return f;
}

SmoothFunction SmoothFunction::sine(int m, int d, double amplitude, double frequency) {
    auto impl = Impl::base(m, d, "sine",
                          std::abs(amplitude) * std::pow(std::max(1.0, std::abs(frequency)), 4));
    const double A = amplitude;
    const double w = frequency;
    auto jet = [A, w, d](double y, int a) {
        const double th = w * y + a * std::numbers::pi_v<double> / (2.0 * d);
        const double sn = std::sin(th);
        const double cs = std::cos(th);
        return ScalarJet{A * sn, A * w * cs, -A * w * w * sn, -A * w * w * w * cs,
                         A * w * w * w * w * sn};
    };
    impl->f = diagonal_level(m, d, 0, jet);
    impl->f1 = diagonal_level(m, d, 1, jet);
    impl->f2 = diagonal_level(m, d, 2, jet);
    impl->f3 = diagonal_level(m, d, 3, jet);
    impl->f4 = diagonal_level(m, d, 4, jet);
    SmoothFunction f;
    f.impl_ = impl;
    return f;
}

SmoothFunction SmoothFunction::scaled_logistic(int m, int d, double scale, double rate) {
    auto impl = Impl::base(m, d, "scaled_logistic",
                          std::abs(scale) * std::pow(std::max(1.0, std::abs(rate)), 4));
    const double S = scale;
    const double r = rate;
    auto jet = [S, r](double y, int a) {
        const double u = r * y + a;
        const double s = 1.0 / (1.0 + std::exp(-u));
        const double p = s * (1.0 - s);
        return ScalarJet{S * s, S * p * r, S * p * (1.0 - 2.0 * s) * r * r,
                         S * p * (1.0 - 6.0 * s + 6.0 * s * s) * r * r * r,
                         S * p * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s) * r * r * r * r};
    };
    impl->f = diagonal_level(m, d, 0, jet);
    impl->f1 = diagonal_level(m, d, 1, jet);
    impl->f2 = diagonal_level(m, d, 2, jet);
    impl->f3 = diagonal_level(m, d, 3, jet);
    impl->f4 = diagonal_level(m, d, 4, jet);
    SmoothFunction f;
    f.impl_ = impl;
    return f;
}

SmoothFunction SmoothFunction::custom(int m, int d, std::string name, MapFn f, MapFn f1, MapFn f2,
                                      MapFn f3, MapFn f4, double bound) {
    if (!f || !f1 || !f2 || !f3 || !f4)
        throw std::invalid_argument("custom function: all five level closures are required");
    auto impl = Impl::base(m, d, std::move(name), bound);
    impl->f = std::move(f);
    impl->f1 = std::move(f1);
    impl->f2 = std::move(f2);
    impl->f3 = std::move(f3);
    impl->f4 = std::move(f4);
    SmoothFunction fn;
    fn.impl_ = impl;
    return fn;
}

int SmoothFunction::m() const { return impl_->m; }
int SmoothFunction::d() const { return impl_->d; }
const std::string& SmoothFunction::name() const { return impl_->name; }
double SmoothFunction::bound() const { return impl_->bound; }

Tensor SmoothFunction::eval(const Tensor& y) const {
    impl_->check_input(y);
    return impl_->f(y);
}
Tensor SmoothFunction::d1(const Tensor& y) const {
    impl_->check_input(y);
    return impl_->f1(y);
}
Tensor SmoothFunction::d2(const Tensor& y) const {
    impl_->check_input(y);
    return impl_->f2(y);
}
Tensor SmoothFunction::d3(const Tensor& y) const {
    impl_->check_input(y);
    return impl_->f3(y);
}
Tensor SmoothFunction::d4(const Tensor& y) const {
    impl_->check_input(y);
    return impl_->f4(y);
}

void SmoothFunction::probe_derivatives(std::uint64_t seed) const {
    bool expected = false;
    if (!impl_->probed.compare_exchange_strong(expected, true)) return;
    const int m = impl_->m;
    const double h = 1e-5;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const std::array<const MapFn*, 5> levels{&impl_->f, &impl_->f1, &impl_->f2, &impl_->f3,
                                             &impl_->f4};
    for (int probe = 0; probe < 3; ++probe) {
        Tensor y(std::vector<int>{m});
        for (int i = 0; i < m; ++i) y[i] = unif(rng);
        for (int level = 1; level <= 4; ++level) {
            const Tensor analytic = (*levels[static_cast<std::size_t>(level)])(y);
            const double scale = std::max(1.0, analytic.max_abs());
            for (int j = 0; j < m; ++j) {
                Tensor yp = y;
                Tensor ym = y;
                yp[j] += h;
                ym[j] -= h;
                const Tensor fd =
                    ((*levels[static_cast<std::size_t>(level - 1)])(yp) -
                     (*levels[static_cast<std::size_t>(level - 1)])(ym)) *
                    (0.5 / h);
                for (int p = 0; p < fd.size(); ++p) {
                    const double got = analytic[p * m + j];
                    if (std::abs(fd[p] - got) > 1e-5 * scale)
                        throw DerivativeMismatch(
                            impl_->name + ": level " + std::to_string(level) +
                            " disagrees with central differences at flat index " +
                            std::to_string(p * m + j));
                }
            }
        }
    }
}

namespace {

Tensor fiber_tensor(const double* fib, int d) {
    Tensor f(std::vector<int>{d});
    std::copy(fib, fib + d, f.data());
    return f;
}

Tensor combine(ConvMode mode, const Tensor& block, const Tensor& y) {
    return mode == ConvMode::TensorProduct ? outer(block, y) : apply(y, block);
}

// Result shape of an n-variable convolution against values shaped like y.
std::vector<int> conv_shape(ConvMode mode, int d, int nvars, const Tensor& y, const char* who) {
    if (mode == ConvMode::TensorProduct) {
        std::vector<int> s(static_cast<std::size_t>(nvars), d);
        s.insert(s.end(), y.shape().begin(), y.shape().end());
        return s;
    }
    if (y.rank() < nvars)
        throw std::invalid_argument(std::string(who) + ": value rank too small for ApplyMap");
    for (int i = 0; i < nvars; ++i)
        if (y.shape()[static_cast<std::size_t>(y.rank() - 1 - i)] != d)
            throw std::invalid_argument(std::string(who) +
                                        ": trailing dimensions must equal the driver dimension");
    return std::vector<int>(y.shape().begin(), y.shape().end() - nvars);
}

// The germ sums are exact at every level, so beta only has to clear the
// validator; kappa tracks the kernel order, clamped into (0, 1).
SewingExponents conv_exponents(double gamma) {
    SewingExponents e;
    e.beta = 1.25;
    e.kappa = std::clamp(gamma, 0.05, 0.94);
    e.theta = 0.0;
    e.alpha = 1.0 - e.kappa;
    e.gamma = gamma;
    return e;
}

SewOptions sew_options(const ConvOptions& o) {
    SewOptions s;
    s.tol = o.tol;
    s.max_level = o.max_level;
    s.threads = o.threads;
    return s;
}

void write_into(const Tensor& v, double* out) {
    std::copy(v.data(), v.data() + v.size(), out);
}

// out[p..., q...] = sum_j A[p..., j] B[j, q...]
Tensor contract_last_first(const Tensor& A, const Tensor& B) {
    const int J = A.shape().back();
    if (B.rank() < 1 || B.shape().front() != J)
        throw std::invalid_argument("contraction mismatch");
    const int P = A.size() / J;
    const int Q = B.size() / J;
    std::vector<int> shape(A.shape().begin(), A.shape().end() - 1);
    shape.insert(shape.end(), B.shape().begin() + 1, B.shape().end());
    Tensor out(shape);
    for (int p = 0; p < P; ++p)
        for (int j = 0; j < J; ++j) {
            const double a = A[p * J + j];
            if (a == 0.0) continue;
            for (int q = 0; q < Q; ++q) out[p * Q + q] += a * B[j * Q + q];
        }
    return out;
}

}  // namespace

Tensor conv1(const VolterraSignature& sig, double s, double u, double t, double tau,
             const Upper1Fn& y_upper, const ConvOptions& opts) {
    if (!y_upper) throw std::invalid_argument("conv1: integrand closure is required");
    if (!(s <= u)) throw std::invalid_argument("conv1: skeleton anchor must satisfy s <= u");
    const int d = sig.dim();
    const Tensor y0 = y_upper(u);
    const std::vector<int> out_shape = conv_shape(opts.mode, d, 1, y0, "conv1");
    if (opts.diagnostics) *opts.diagnostics = SewingDiagnostics{};
    if (!(t > u)) return Tensor(out_shape);

    const Kernel& k = sig.kernel();
    const DrivingPath& x = sig.path();
    const double stall = sig.quad().stall_tol;
    const SingleGerm germ = [&](double a, double b, double) {
        const Tensor ya = y_upper(a);
        Tensor cell = combine(opts.mode, sig.level1(s, b, tau) - sig.level1(s, a, tau), ya);
        cell += kernel_weighted_integral(
            k, x, a, b, tau, out_shape,
            [&](double r, const double* fib, double* o) {
                write_into(combine(opts.mode, fiber_tensor(fib, d), y_upper(r) - ya), o);
            },
            opts.quad, stall);
        return cell;
    };
    SewResult res = sew_single(germ, conv_exponents(k.order()), u, t, tau, sew_options(opts));
    if (opts.diagnostics) *opts.diagnostics = res.diagnostics;
    return res.value;
}

Tensor conv2(const VolterraSignature& sig, double s, double t, double tau, const Upper2Fn& y12,
             const ConvOptions& opts) {
    if (!y12) throw std::invalid_argument("conv2: integrand closure is required");
    const int d = sig.dim();
    const Tensor y0 = y12(s, s);
    const std::vector<int> out_shape = conv_shape(opts.mode, d, 2, y0, "conv2");
    const std::vector<int> mid_shape = conv_shape(opts.mode, d, 1, y0, "conv2");
    if (opts.diagnostics) *opts.diagnostics = SewingDiagnostics{};
    if (!(t > s)) return Tensor(out_shape);

    const Kernel& k = sig.kernel();
    const DrivingPath& x = sig.path();
    const double stall = sig.quad().stall_tol;
    const SingleGerm germ = [&](double a, double b, double) {
        const Tensor ya = y12(a, a);
        Tensor cell = combine(
            opts.mode,
            sig.level(TreeSymbol::Chain2, s, b, tau) - sig.level(TreeSymbol::Chain2, s, a, tau),
            ya);
        cell += kernel_weighted_integral(
            k, x, a, b, tau, out_shape,
            [&](double r1, const double* fib1, double* o) {
                const Tensor f1t = fiber_tensor(fib1, d);
                const Tensor inner = kernel_weighted_integral(
                    k, x, s, r1, r1, mid_shape,
                    [&](double r2, const double* fib2, double* o2) {
                        write_into(combine(opts.mode, fiber_tensor(fib2, d), y12(r1, r2) - ya),
                                   o2);
                    },
                    opts.quad, stall);
                write_into(combine(opts.mode, f1t, inner), o);
            },
            opts.quad, stall);
        return cell;
    };
    SewResult res = sew_single(germ, conv_exponents(k.order()), s, t, tau, sew_options(opts));
    if (opts.diagnostics) *opts.diagnostics = res.diagnostics;
    return res.value;
}

Tensor conv3(const VolterraSignature& sig, TreeSymbol sigma, double s, double t, double tau,
             const Upper3Fn& y123, const ConvOptions& opts) {
    if (!y123) throw std::invalid_argument("conv3: integrand closure is required");
    if (sigma != TreeSymbol::Chain3 && sigma != TreeSymbol::Vee)
        throw std::invalid_argument("conv3: sigma must be chain3 or vee");
    const int d = sig.dim();
    const Tensor y0 = y123(s, s, s);
    const std::vector<int> out_shape = conv_shape(opts.mode, d, 3, y0, "conv3");
    const std::vector<int> sh2 = conv_shape(opts.mode, d, 2, y0, "conv3");
    const std::vector<int> sh1 = conv_shape(opts.mode, d, 1, y0, "conv3");
    if (opts.diagnostics) *opts.diagnostics = SewingDiagnostics{};
    if (!(t > s)) return Tensor(out_shape);

    const Kernel& k = sig.kernel();
    const DrivingPath& x = sig.path();
    const double stall = sig.quad().stall_tol;
    const SingleGerm germ = [&](double a, double b, double) {
        const Tensor ya = y123(a, a, a);
        Tensor cell =
            combine(opts.mode, sig.level(sigma, s, b, tau) - sig.level(sigma, s, a, tau), ya);
        cell += kernel_weighted_integral(
            k, x, a, b, tau, out_shape,
            [&](double r1, const double* fib1, double* o) {
                const Tensor f1t = fiber_tensor(fib1, d);
                Tensor inner2;
                if (sigma == TreeSymbol::Chain3) {
                    inner2 = kernel_weighted_integral(
                        k, x, s, r1, r1, sh2,
                        [&](double r2, const double* fib2, double* o2) {
                            const Tensor f2t = fiber_tensor(fib2, d);
                            const Tensor inner1 = kernel_weighted_integral(
                                k, x, s, r2, r2, sh1,
                                [&](double r3, const double* fib3, double* o3) {
                                    write_into(combine(opts.mode, fiber_tensor(fib3, d),
                                                       y123(r1, r2, r3) - ya),
                                               o3);
                                },
                                opts.quad, stall);
                            write_into(combine(opts.mode, f2t, inner1), o2);
                        },
                        opts.quad, stall);
                } else {
                    inner2 = kernel_weighted_integral(
                        k, x, s, r1, r1, sh2,
                        [&](double l1, const double* fibl1, double* o2) {
                            const Tensor fl1 = fiber_tensor(fibl1, d);
                            const Tensor inner1 = kernel_weighted_integral(
                                k, x, s, r1, r1, sh1,
                                [&](double l2, const double* fibl2, double* o3) {
                                    write_into(combine(opts.mode, fiber_tensor(fibl2, d),
                                                       y123(r1, l1, l2) - ya),
                                               o3);
                                },
                                opts.quad, stall);
                            write_into(combine(opts.mode, fl1, inner1), o2);
                        },
                        opts.quad, stall);
                }
                write_into(combine(opts.mode, f1t, inner2), o);
            },
            opts.quad, stall);
        return cell;
    };
    SewResult res = sew_single(germ, conv_exponents(k.order()), s, t, tau, sew_options(opts));
    if (opts.diagnostics) *opts.diagnostics = res.diagnostics;
    return res.value;
}

Tensor conv_pair(const VolterraSignature& sig, double s, double t, double tau, const Upper2Fn& y12,
                 const ConvOptions& opts) {
    if (!y12) throw std::invalid_argument("conv_pair: integrand closure is required");
    const int d = sig.dim();
    const Tensor y0 = y12(s, s);
    const std::vector<int> out_shape = conv_shape(opts.mode, d, 2, y0, "conv_pair");
    const std::vector<int> mid_shape = conv_shape(opts.mode, d, 1, y0, "conv_pair");
    if (opts.diagnostics) *opts.diagnostics = SewingDiagnostics{};
    if (!(t > s)) return Tensor(out_shape);

    const Kernel& k = sig.kernel();
    const DrivingPath& x = sig.path();
    const double stall = sig.quad().stall_tol;
    return kernel_weighted_integral(
        k, x, s, t, tau, out_shape,
        [&](double r1, const double* fib1, double* o) {
            const Tensor f1t = fiber_tensor(fib1, d);
            const Tensor inner = kernel_weighted_integral(
                k, x, s, t, tau, mid_shape,
                [&](double r2, const double* fib2, double* o2) {
                    write_into(combine(opts.mode, fiber_tensor(fib2, d), y12(r1, r2)), o2);
                },
                opts.quad, stall);
            write_into(combine(opts.mode, f1t, inner), o);
        },
        opts.quad, stall);
}

Eval3Fn lift_upper(Eval2Fn y12) {
    if (!y12) throw std::invalid_argument("lift_upper: closure is required");
    return [y12 = std::move(y12)](double t, double, double q, double r) { return y12(t, q, r); };
}

namespace {

// Memo for the inner value slice of a composition. Quadrature loops revisit the
// same (t, tau) pair many times while varying deeper upper arguments, and for
// lifted paths each miss costs a full integral.
struct ValueMemo {
    struct Key {
        std::uint64_t t;
        std::uint64_t tau;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = (k.t ^ (k.tau << 31) ^ (k.tau >> 17)) * 0x9e3779b97f4a7c15ull;
            return static_cast<std::size_t>(h ^ (h >> 29));
        }
    };

    mutable std::shared_mutex mutex;
    mutable std::unordered_map<Key, Tensor, KeyHash> table;

    Tensor get(const ControlledPath& y, double t, double tau) const {
        const Key key{std::bit_cast<std::uint64_t>(t), std::bit_cast<std::uint64_t>(tau)};
        {
            std::shared_lock lock(mutex);
            auto it = table.find(key);
            if (it != table.end()) return it->second;
        }
        Tensor value = y.value(t, tau);
        std::unique_lock lock(mutex);
        if (table.size() >= 65536) table.clear();
        return table.try_emplace(key, std::move(value)).first->second;
    }
};

}  // namespace

ControlledPath compose(const SmoothFunction& f, const ControlledPath& y) {
    f.probe_derivatives();
    if (!y.in_d_hat())
        throw std::invalid_argument("compose: the controlled path must be a D-hat bundle");
    if (y.value_shape() != std::vector<int>{f.m()})
        throw std::invalid_argument("compose: value shape must be [m]");
    if (y.driver_dim() != f.d())
        throw std::invalid_argument("compose: driver dimensions disagree");
    const int m = f.m();
    const int d = f.d();
    auto memo = std::make_shared<ValueMemo>();

    ControlledPath::PathFn val = [f, y, memo](double t, double tau) {
        return f.eval(memo->get(y, t, tau));
    };
    ControlledPath::DotFn dot = [f, y, memo](double t, double tau, double p) {
        return contract_last_first(f.d1(memo->get(y, t, tau)), y.dot(t, p, p));
    };
    ControlledPath::SlotFn cherry = [f, y, memo](double t, double tau, double q, double p) {
        return contract_last_first(f.d1(memo->get(y, t, tau)), y.cherry(t, q, q, p));
    };
    ControlledPath::SlotFn pair = [f, y, m, d, memo](double t, double tau, double q, double p) {
        const Tensor f2 = f.d2(memo->get(y, t, tau));
        const Tensor dq = y.dot(t, q, q);
        const Tensor dp = y.dot(t, p, p);
        Tensor out({m, d, d, d});
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    for (int c = 0; c < d; ++c) {
                        double acc = 0.0;
                        for (int j = 0; j < m; ++j)
                            for (int kk = 0; kk < m; ++kk)
                                acc += f2[((i * d + a) * m + j) * m + kk] * dq[j * d + b] *
                                       dp[kk * d + c];
                        out[((i * d + a) * d + b) * d + c] = 0.5 * acc;
                    }
        return out;
    };
    return ControlledPath({m, d}, d, std::move(val), std::move(dot), std::move(cherry),
                          std::move(pair), false);
}

Tensor remainder_y(const VolterraSignature& sig, const ControlledPath& y, double s, double t,
                   double tau, const ConvOptions& opts) {
    ConvOptions local = opts;
    local.mode = ConvMode::ApplyMap;
    local.diagnostics = nullptr;
    Tensor r = y.value(t, tau) - y.value(s, tau);
    r -= conv1(sig, s, s, t, tau, [&](double p) { return y.dot(s, tau, p); }, local);
    r -= conv2(sig, s, t, tau, [&](double q, double p) { return y.cherry(s, tau, q, p); }, local);
    if (!y.in_d_hat())
        r -= conv_pair(sig, s, t, tau, [&](double q, double p) { return y.pair(s, tau, q, p); },
                       local);
    return r;
}

Tensor remainder_dot(const VolterraSignature& sig, const ControlledPath& y, double s, double t,
                     double tau, double p, const ConvOptions& opts) {
    ConvOptions local = opts;
    local.mode = ConvMode::ApplyMap;
    local.diagnostics = nullptr;
    Tensor r = y.dot(t, tau, p) - y.dot(s, tau, p);
    r -= conv1(
        sig, s, s, t, tau,
        [&](double q) { return y.cherry(s, tau, p, q) + 2.0 * y.pair(s, tau, p, q); }, local);
    return r;
}

double cancellation_residual(const Tensor& f2, const Tensor& ydot, const Tensor& z1) {
    if (f2.rank() != 4 || ydot.rank() != 2 || z1.rank() != 1)
        throw std::invalid_argument("cancellation: ranks must be (4, 2, 1)");
    const int m = f2.shape()[0];
    const int da = f2.shape()[1];
    const int db = z1.shape()[0];
    if (f2.shape()[2] != m || f2.shape()[3] != m || ydot.shape()[0] != m ||
        ydot.shape()[1] != db)
        throw std::invalid_argument("cancellation: dimension mismatch");
    std::vector<double> A(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j)
        for (int b = 0; b < db; ++b) A[static_cast<std::size_t>(j)] += ydot[j * db + b] * z1[b];
    double worst = 0.0;
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < da; ++a)
            for (int c = 0; c < db; ++c) {
                double lhs = 0.0;
                double rhs = 0.0;
                for (int j = 0; j < m; ++j)
                    for (int kk = 0; kk < m; ++kk) {
                        const double coef = f2[((i * da + a) * m + j) * m + kk];
                        lhs += coef * A[static_cast<std::size_t>(j)] * ydot[kk * db + c];
                        rhs += coef * ydot[j * db + c] * A[static_cast<std::size_t>(kk)];
                    }
                worst = std::max(worst, std::abs(lhs - rhs));
            }
    return worst;
}

double cancellation_check(const VolterraSignature& sig, const ControlledPath& y,
                          const SmoothFunction& f, double s, double t, double tau) {
    const Tensor f2 = f.d2(y.value(s, tau));
    const Tensor ydot = y.dot(s, tau, tau);
    const Tensor z1 = sig.level1(s, t, tau);
    return cancellation_residual(f2, ydot, z1);
}

}  // namespace volterra
