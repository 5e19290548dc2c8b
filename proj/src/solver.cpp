#include "volterra/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "volterra/errors.hpp"
#include "volterra/parallel.hpp"
#include "volterra/quadrature.hpp"

namespace volterra {

namespace {

struct Exponents {
    double alpha = 0.0;
    double gamma = 0.0;
    double beta = 0.0;
};

Exponents resolve_exponents(const VolterraSignature& sig, const SolverOptions& opts) {
    Exponents e;
    e.alpha = opts.alpha > 0.0 ? opts.alpha : sig.path().alpha_hint();
    e.gamma = opts.gamma >= 0.0 ? opts.gamma : sig.kernel().order();
    const double rho = e.alpha - e.gamma;
    if (!(rho > 0.25)) {
        std::ostringstream msg;
        msg << "solver: alpha - gamma = " << rho << " must exceed 1/4";
        throw ExponentError(msg.str());
    }
    e.beta = opts.beta > 0.0 ? opts.beta : e.alpha - 0.5 * (rho - 0.25);
    if (!(e.beta < e.alpha) || !(e.beta - e.gamma > 0.25)) {
        std::ostringstream msg;
        msg << "solver: beta = " << e.beta
            << " needs beta < alpha and beta - gamma > 1/4";
        throw ExponentError(msg.str());
    }
    return e;
}

// Contract the last index of a against the first index of b.
Tensor contract_last_first(const Tensor& a, const Tensor& b) {
    const int kdim = a.shape().back();
    if (b.shape().front() != kdim)
        throw std::invalid_argument("solver contract: inner dimensions disagree");
    std::vector<int> shape(a.shape().begin(), a.shape().end() - 1);
    shape.insert(shape.end(), b.shape().begin() + 1, b.shape().end());
    const int rows = a.size() / kdim;
    const int cols = b.size() / kdim;
    Tensor out(shape);
    for (int r = 0; r < rows; ++r) {
        for (int j = 0; j < kdim; ++j) {
            const double av = a[r * kdim + j];
            if (av == 0.0) continue;
            for (int c = 0; c < cols; ++c) out[r * cols + c] += av * b[j * cols + c];
        }
    }
    return out;
}

// Integral over [a, t] of k(tau, r) F(r) dx_r where F is the piecewise-linear
// interpolant of a table on master nodes, shape [m, d] per node. Pieces are cut
// at every master node and driver breakpoint so both interpolants are linear on
// each piece; closed-form kernel moments apply piecewise when available and a
// nested quadrature covers the rest.
Tensor moment_integral(const Kernel& k, const DrivingPath& x,
                       const std::vector<double>& nodes, const std::vector<Tensor>& F,
                       double a, double t, double tau, const DeOptions& quad) {
    const int m = F.front().shape()[0];
    const int d = F.front().shape()[1];
    Tensor out({m});
    if (!(t > a)) return out;

    std::vector<double> cuts;
    cuts.reserve(nodes.size() + 8);
    cuts.push_back(a);
    for (double v : nodes)
        if (v > a && v < t) cuts.push_back(v);
    const bool pl = x.kind() == DrivingPath::Kind::PiecewiseLinear;
    if (pl) {
        for (double v : x.times())
            if (v > a && v < t) cuts.push_back(v);
    }
    cuts.push_back(t);
    std::sort(cuts.begin(), cuts.end());

    const bool closed = pl && k.has_primitive();
    std::vector<double> xp(static_cast<std::size_t>(d));
    for (std::size_t pi = 0; pi + 1 < cuts.size(); ++pi) {
        const double p0 = cuts[pi];
        const double p1 = cuts[pi + 1];
        if (!(p1 > p0)) continue;
        const double mid = 0.5 * (p0 + p1);
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), mid);
        const int cell = std::clamp(static_cast<int>(it - nodes.begin()) - 1, 0,
                                    static_cast<int>(nodes.size()) - 2);
        const double n0 = nodes[static_cast<std::size_t>(cell)];
        const double inv = 1.0 / (nodes[static_cast<std::size_t>(cell) + 1] - n0);
        const Tensor& fl = F[static_cast<std::size_t>(cell)];
        const Tensor& fh = F[static_cast<std::size_t>(cell) + 1];
        if (closed) {
            const int seg = x.segment_of(mid);
            const double m0 = k.moment0(tau, p0, p1);
            const double m1 = k.moment1(tau, p0, p1, n0);
            for (int i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double lo = fl[i * d + j];
                    const double slope = (fh[i * d + j] - lo) * inv;
                    acc += x.segment_slope(seg, j) * (lo * m0 + slope * m1);
                }
                out[i] += acc;
            }
        } else {
            DeResult piece = de_integrate(
                {m},
                [&](double r, double dist_upper, double, double* buf) {
                    const double kv = k.eval_dist((tau - p1) + dist_upper);
                    x.derivative_into(r, xp.data());
                    const double w1 = (r - n0) * inv;
                    for (int i = 0; i < m; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < d; ++j) {
                            const double fv =
                                fl[i * d + j] * (1.0 - w1) + fh[i * d + j] * w1;
                            acc += fv * xp[static_cast<std::size_t>(j)];
                        }
                        buf[i] = kv * acc;
                    }
                },
                p0, p1, quad);
            out += piece.value;
        }
    }
    return out;
}

void check_initial_bundle(const SmoothFunction& f, const ControlledPath& y, double a) {
    if (!y.in_d_hat())
        throw InitialBundleMismatch("picard map: starting bundle must live in the reduced class");
    if (y.value_shape() != std::vector<int>{f.m()} || y.driver_dim() != f.d())
        throw InitialBundleMismatch("picard map: bundle shapes do not match f");
    const Tensor y0 = y.value(a, a);
    const Tensor want_dot = f.eval(y0);
    const Tensor want_cherry = contract_last_first(f.d1(y0), want_dot);
    const double scale =
        std::max({1.0, y0.max_abs(), want_dot.max_abs(), want_cherry.max_abs()});
    const double tol = 1e-8 * scale;
    if (max_abs_diff(y.dot(a, a, a), want_dot) > tol)
        throw InitialBundleMismatch("picard map: first slot at the base point is not f(y0)");
    if (max_abs_diff(y.cherry(a, a, a, a), want_cherry) > tol)
        throw InitialBundleMismatch(
            "picard map: second slot at the base point is not f'(y0) f(y0)");
    if (y.pair(a, a, a, a).max_abs() > tol)
        throw InitialBundleMismatch("picard map: pair slot must vanish at the base point");
}

// Bundle whose value is off(tau) + the kernel-weighted integral of the tabulated
// integrand from a to t, with derivative slots regenerated through f.
ControlledPath build_bundle(const VolterraSignature& sig, const SmoothFunction& f,
                            std::shared_ptr<const std::vector<double>> nodes,
                            std::shared_ptr<const std::vector<Tensor>> table,
                            std::function<Tensor(double)> off, double a,
                            const DeOptions& quad) {
    const Kernel k = sig.kernel();
    const DrivingPath x = sig.path();
    auto value = [k, x, nodes, table, off, a, quad](double t, double tau) {
        Tensor v = off(tau);
        v += moment_integral(k, x, *nodes, *table, a, t, tau, quad);
        return v;
    };
    auto dot = [f, value](double t, double, double p) { return f.eval(value(t, p)); };
    auto cherry = [f, value](double t, double, double q, double p) {
        return contract_last_first(f.d1(value(t, q)), f.eval(value(t, p)));
    };
    const Tensor zero_pair = Tensor::zeros({f.m(), f.d(), f.d()});
    auto pair = [zero_pair](double, double, double, double) { return zero_pair; };
    return ControlledPath({f.m()}, f.d(), value, dot, cherry, pair, true);
}

}  // namespace

ControlledPath picard_map(const VolterraSignature& sig, const SmoothFunction& f,
                          const ControlledPath& y, std::pair<double, double> interval,
                          const SolverOptions& opts) {
    f.probe_derivatives();
    (void)resolve_exponents(sig, opts);
    const double a = interval.first;
    const double b = interval.second;
    if (!(b > a)) throw std::invalid_argument("picard map: interval must be nonempty");
    if (f.d() != sig.dim())
        throw std::invalid_argument("picard map: f and driver dimensions disagree");
    if (b > sig.path().horizon() * (1.0 + 1e-9) + 1e-12)
        throw std::invalid_argument("picard map: interval exceeds the driver horizon");
    check_initial_bundle(f, y, a);

    const int level = std::clamp(opts.grid_level, 1, 20);
    TimeGrid grid = TimeGrid::dyadic(a, b, level);
    auto nodes = std::make_shared<std::vector<double>>(grid.points());
    const int n = static_cast<int>(nodes->size());
    std::vector<Tensor> table(static_cast<std::size_t>(n));
    parallel_for(n, opts.threads, [&](int i, int) {
        const double t = (*nodes)[static_cast<std::size_t>(i)];
        table[static_cast<std::size_t>(i)] = f.eval(y.value(t, t));
    });
    auto shared_table =
        std::make_shared<const std::vector<Tensor>>(std::move(table));
    auto off = [y, a](double tau) { return y.value(a, tau); };
    return build_bundle(sig, f, nodes, shared_table, off, a, DeOptions{});
}

double choose_step(double M, double Q, double alpha, double beta, double c_hat,
                   double remaining, double horizon) {
    if (!(M >= 0.0) || !(Q >= 0.0))
        throw std::invalid_argument("choose_step: M and Q must be nonnegative");
    if (!(alpha > beta)) throw std::invalid_argument("choose_step: needs beta < alpha");
    if (!(c_hat > 0.0)) throw std::invalid_argument("choose_step: c_hat must be positive");
    if (!(remaining > 0.0) || !(horizon > 0.0))
        throw std::invalid_argument("choose_step: remaining and horizon must be positive");
    const double ex = alpha - beta;
    double that = remaining;
    if (M > 0.0) {
        const double ball = c_hat * M * (1.0 + M * M * M * M) * (1.0 + Q * Q * Q);
        that = std::min(that, std::pow(0.5 / ball, 1.0 / ex));
        that = std::min(that, std::pow(0.5 / (c_hat * M), 1.0 / ex));
    }
    if (that < horizon * 1e-6 && that < remaining) {
        std::ostringstream msg;
        msg << "choose_step: step " << that << " fell below " << horizon * 1e-6;
        throw StepUnderflow(msg.str());
    }
    return that;
}

SolutionTrace solve(const VolterraSignature& sig, const SmoothFunction& f,
                    const Tensor& y0, double T, const SolverOptions& opts) {
    f.probe_derivatives();
    const Exponents e = resolve_exponents(sig, opts);
    if (f.d() != sig.dim())
        throw std::invalid_argument("solve: f and driver dimensions disagree");
    if (y0.shape() != std::vector<int>{f.m()})
        throw std::invalid_argument("solve: y0 must have shape [m]");
    if (!(T > 0.0)) throw std::invalid_argument("solve: horizon must be positive");
    const DrivingPath& x = sig.path();
    if (T > x.horizon() * (1.0 + 1e-9) + 1e-12)
        throw std::invalid_argument("solve: horizon exceeds the driver's");
    const Kernel& k = sig.kernel();

    const int level = std::clamp(opts.grid_level, 1, 20);
    TimeGrid grid = TimeGrid::dyadic(0.0, T, level);
    const int n = grid.size();
    const std::vector<double>& nodes = grid.points();
    const double hcell = T / static_cast<double>(n - 1);
    const DeOptions quad{};

    std::vector<Tensor> g(static_cast<std::size_t>(n), y0);
    std::vector<Tensor> F(static_cast<std::size_t>(n), f.eval(y0));
    const TimeGrid coarse = TimeGrid::dyadic(0.0, T, std::min(level, 6));
    const double M = x.holder_norm(e.alpha, coarse);
    const double Q = std::max(y0.max_abs(), F[0].max_abs());

    SolutionTrace trace;
    trace.times = nodes;

    double c_hat = opts.c_hat0;
    const double tol = opts.picard_tol;
    int lo = 0;
    while (lo < n - 1) {
        const double t_lo = nodes[static_cast<std::size_t>(lo)];
        double cap = std::numeric_limits<double>::infinity();
        int retries = 0;
        bool accepted = false;
        StepDiagnostics diag;
        while (!accepted) {
            double that = 0.0;
            try {
                that = choose_step(M, Q, e.alpha, e.beta, c_hat, T - t_lo, T);
            } catch (const StepUnderflow& err) {
                throw NoConvergence(std::string("solve: ") + err.what());
            }
            that = std::min(that, cap);
            if (!(that >= T * 1e-6)) {
                std::ostringstream msg;
                msg << "solve: step underflow at t = " << t_lo << " after " << retries
                    << " retries";
                throw NoConvergence(msg.str());
            }
            int span = static_cast<int>(std::floor(that / hcell + 1e-9));
            span = std::clamp(span, 1, n - 1 - lo);
            const int hi = lo + span;
            for (int j = lo + 1; j <= hi; ++j) {
                g[static_cast<std::size_t>(j)] = g[static_cast<std::size_t>(lo)];
                F[static_cast<std::size_t>(j)] = F[static_cast<std::size_t>(lo)];
            }

            std::vector<Tensor> next(static_cast<std::size_t>(span));
            double prev_diff = -1.0;
            double q_hat = 0.0;
            bool converged = false;
            bool finite = true;
            int iters = 0;
            for (int sweep = 1; sweep <= opts.max_picard; ++sweep) {
                parallel_for(span, opts.threads, [&](int jj, int) {
                    const int j = lo + 1 + jj;
                    Tensor v = y0;
                    v += moment_integral(k, x, nodes, F, 0.0,
                                         nodes[static_cast<std::size_t>(j)],
                                         nodes[static_cast<std::size_t>(j)], quad);
                    next[static_cast<std::size_t>(jj)] = std::move(v);
                });
                iters = sweep;
                double diff = 0.0;
                for (int jj = 0; jj < span; ++jj) {
                    const Tensor& nv = next[static_cast<std::size_t>(jj)];
                    if (!nv.all_finite()) {
                        finite = false;
                        break;
                    }
                    diff = std::max(
                        diff, max_abs_diff(nv, g[static_cast<std::size_t>(lo + 1 + jj)]));
                }
                if (!finite) break;
                for (int jj = 0; jj < span; ++jj) {
                    const int j = lo + 1 + jj;
                    g[static_cast<std::size_t>(j)] = next[static_cast<std::size_t>(jj)];
                    F[static_cast<std::size_t>(j)] =
                        f.eval(g[static_cast<std::size_t>(j)]);
                }
                if (prev_diff > 1e-300) q_hat = std::max(q_hat, diff / prev_diff);
                if (diff <= tol) {
                    converged = true;
                    break;
                }
                if (diff > 1e6 * (1.0 + Q)) break;
                prev_diff = diff;
            }
            if (converged && q_hat < 1.0) {
                accepted = true;
                diag = {t_lo, nodes[static_cast<std::size_t>(hi)], iters, q_hat, retries,
                        c_hat};
                lo = hi;
            } else {
                ++retries;
                c_hat *= 2.0;
                cap = std::max(that, hcell) * opts.step_shrink;
            }
        }
        trace.steps.push_back(diag);
    }
    trace.diagonal = g;

    for (double tau : opts.tau_slices) {
        if (!(tau >= 0.0) || tau > T * (1.0 + 1e-12))
            throw std::invalid_argument("solve: tau slices must lie in [0, T]");
        std::vector<Tensor> row;
        for (int i = 0; i < n; ++i) {
            const double t = nodes[static_cast<std::size_t>(i)];
            if (t > tau + 1e-12 * std::max(1.0, tau)) break;
            Tensor v = y0;
            v += moment_integral(k, x, nodes, F, 0.0, std::min(t, tau), tau, quad);
            row.push_back(std::move(v));
        }
        trace.slice_taus.push_back(tau);
        trace.slices.push_back(std::move(row));
    }
    return trace;
}

ControlledPath solution_path(const VolterraSignature& sig, const SmoothFunction& f,
                             const SolutionTrace& trace, const SolverOptions& opts) {
    (void)opts;
    f.probe_derivatives();
    if (trace.times.size() < 2 || trace.diagonal.size() != trace.times.size())
        throw std::invalid_argument("solution path: trace must hold a grid and its diagonal");
    if (f.d() != sig.dim())
        throw std::invalid_argument("solution path: f and driver dimensions disagree");
    auto nodes = std::make_shared<const std::vector<double>>(trace.times);
    std::vector<Tensor> table;
    table.reserve(trace.diagonal.size());
    for (const Tensor& gi : trace.diagonal) table.push_back(f.eval(gi));
    auto shared_table =
        std::make_shared<const std::vector<Tensor>>(std::move(table));
    const Tensor y0 = trace.diagonal.front();
    auto off = [y0](double) { return y0; };
    return build_bundle(sig, f, nodes, shared_table, off, nodes->front(), DeOptions{});
}

}  // namespace volterra
