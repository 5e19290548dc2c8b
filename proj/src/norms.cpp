#include "volterra/norms.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include "volterra/parallel.hpp"

namespace volterra {

namespace {

constexpr double kSentinel = 1e12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double pow_dist(double base, double expo) {
    if (base <= 0.0) {
        if (expo > 0.0) return 0.0;
        if (expo == 0.0) return 1.0;
        return kInf;
    }
    return std::pow(base, expo);
}

// [|tau-t|^{-gamma} |t-s|^alpha] ∧ |tau-s|^{alpha-gamma}; at tau = t the first
// branch counts as +infinity whenever gamma > 0.
double one_norm_weight(double s, double t, double tau, double alpha, double gamma) {
    const double b2 = pow_dist(tau - s, alpha - gamma);
    double b1;
    if (tau - t <= 0.0) {
        b1 = gamma > 0.0 ? kInf : pow_dist(t - s, alpha);
    } else {
        b1 = pow_dist(tau - t, -gamma) * pow_dist(t - s, alpha);
    }
    return std::min(b1, b2);
}

// |gap|^eta |mn-t|^{zeta-eta} ([|mn-t|^{-gamma-zeta}|t-s|^alpha] ∧ |mn-s|^{alpha-gamma-zeta})
double mixed_weight(double s, double t, double mn, double gap, double eta, double zeta,
                    double alpha, double gamma) {
    const double lead = pow_dist(gap, eta) * pow_dist(mn - t, zeta - eta);
    const double b1 = pow_dist(mn - t, -gamma - zeta) * pow_dist(t - s, alpha);
    const double b2 = pow_dist(mn - s, alpha - gamma - zeta);
    return lead * std::min(b1, b2);
}

using TupleKey = std::array<double, 7>;  // s, u, t, tau1, tau2, eta, zeta

struct Best {
    double value = -1.0;
    TupleKey key{};

    void offer(double v, const TupleKey& k) {
        if (v > value) {
            value = v;
            key = k;
        } else if (v == value && k < key) {
            key = k;
        }
    }
    void merge(const Best& o) {
        if (o.value >= 0.0) offer(o.value, o.key);
    }
};

NormPart finalize(const Best& b) {
    NormPart part;
    if (b.value < 0.0) return part;
    part.value = b.value > kSentinel ? kInf : b.value;
    part.at = {b.key[0], b.key[1], b.key[2], b.key[3], b.key[4], b.key[5], b.key[6]};
    return part;
}

int clamp_threads(int threads) { return std::max(1, threads); }

// Runs fill(i, slot) over [0, count) in parallel, forwarding the first exception.
template <typename FillFn>
void guarded_parallel(int count, int threads, FillFn&& fill) {
    threads = clamp_threads(threads);
    std::vector<std::exception_ptr> errs(static_cast<size_t>(threads));
    parallel_for(count, threads, [&](int i, int slot) {
        auto& err = errs[static_cast<size_t>(slot)];
        if (err) return;
        try {
            fill(i, slot);
        } catch (...) {
            err = std::current_exception();
        }
    });
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

template <typename CandidateFn>
Best sweep_parallel(int outer, int threads, CandidateFn&& per_outer) {
    threads = clamp_threads(threads);
    std::vector<Best> bests(static_cast<size_t>(threads));
    guarded_parallel(outer, threads,
                     [&](int i, int slot) { per_outer(i, bests[static_cast<size_t>(slot)]); });
    Best total;
    for (const Best& b : bests) total.merge(b);
    return total;
}

std::vector<double> default_etas() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

std::vector<double> default_zetas(double rho) { return {0.0, rho / 4.0, rho / 2.0, 3.0 * rho / 4.0}; }

void check_grid(const TimeGrid& grid, int min_points) {
    if (grid.size() < min_points) throw std::invalid_argument("norms: grid too small");
    const auto& x = grid.points();
    for (size_t i = 0; i + 1 < x.size(); ++i)
        if (!(x[i + 1] > x[i])) throw std::invalid_argument("norms: grid not strictly increasing");
}

struct EtaZetaSweep {
    std::vector<double> etas;
    std::vector<double> zetas;
};

void sweep_mixed(const EtaZetaSweep& sw, double num, double s, double u_col, double t, double tau1,
                 double tau2, double mn, double gap, double alpha, double gamma, Best& best) {
    for (double eta : sw.etas) {
        for (double zeta : sw.zetas) {
            const double w = mixed_weight(s, t, mn, gap, eta, zeta, alpha, gamma);
            if (!(w > 0.0) || !std::isfinite(w)) continue;
            best.offer(num / w, {s, u_col, t, tau1, tau2, eta, zeta});
        }
    }
}

}  // namespace

std::vector<double> NormParams::etas() const {
    return eta_sweep.empty() ? default_etas() : eta_sweep;
}

std::vector<double> NormParams::zetas() const {
    return zeta_sweep.empty() ? default_zetas(rho()) : zeta_sweep;
}

void NormParams::validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(gamma))
        throw std::invalid_argument("NormParams: alpha and gamma must be finite");
    if (gamma < 0.0) throw std::invalid_argument("NormParams: gamma must be nonnegative");
    if (!(rho() > 0.0)) throw std::invalid_argument("NormParams: alpha - gamma must be positive");
    for (double eta : etas())
        if (!(eta >= 0.0) || !(eta <= 1.0))
            throw std::invalid_argument("NormParams: eta sweep must lie in [0, 1]");
    for (double zeta : zetas())
        if (!(zeta >= 0.0) || !(zeta < rho()))
            throw std::invalid_argument("NormParams: zeta sweep must lie in [0, alpha - gamma)");
}

double NormReport::norm_12() const {
    double out = 0.0;
    for (const auto& [label, part] : parts)
        if (label.rfind("12", 0) == 0) out += part.value;
    return out;
}

double NormReport::norm_123() const {
    double out = 0.0;
    for (const auto& [label, part] : parts) out += part.value;
    return out;
}

double NormReport::total() const {
    double out = norm_1.value;
    for (const auto& [label, part] : parts) out += part.value;
    return out;
}

bool NormReport::infinite() const {
    if (std::isinf(norm_1.value)) return true;
    for (const auto& [label, part] : parts)
        if (std::isinf(part.value)) return true;
    return false;
}

const NormPart* NormReport::part(const std::string& label) const {
    for (const auto& [name, p] : parts)
        if (name == label) return &p;
    return nullptr;
}

NormReport volterra_norm(const Delta2Fn& f, const NormParams& params, const TimeGrid& grid,
                         int threads) {
    params.validate();
    if (!f) throw std::invalid_argument("volterra_norm: null function");
    check_grid(grid, 2);
    const int n = grid.size();
    if (n > 130) throw std::invalid_argument("volterra_norm: grid too large for the sweep");
    const auto& x = grid.points();
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const EtaZetaSweep sw{params.etas(), params.zetas()};

    std::vector<Tensor> vals(static_cast<size_t>(n) * static_cast<size_t>(n));
    std::vector<int> pairs;
    pairs.reserve(static_cast<size_t>(n) * static_cast<size_t>(n) / 2);
    for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) pairs.push_back(i * n + k);
    guarded_parallel(static_cast<int>(pairs.size()), threads, [&](int idx, int) {
        const int code = pairs[static_cast<size_t>(idx)];
        const int i = code / n;
        const int k = code % n;
        vals[static_cast<size_t>(code)] = f(x[static_cast<size_t>(i)], x[static_cast<size_t>(k)]);
    });
    auto at = [&](int i, int k) -> const Tensor& {
        return vals[static_cast<size_t>(i * n + k)];
    };

    Best one = sweep_parallel(n, threads, [&](int k, Best& best) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = max_abs_diff(at(j, k), at(i, k));
                const double w = one_norm_weight(x[static_cast<size_t>(i)],
                                                 x[static_cast<size_t>(j)],
                                                 x[static_cast<size_t>(k)], alpha, gamma);
                if (!(w > 0.0) || !std::isfinite(w)) continue;
                best.offer(num / w, {x[static_cast<size_t>(i)], 0.0, x[static_cast<size_t>(j)],
                                     x[static_cast<size_t>(k)], 0.0, 0.0, 0.0});
            }
        }
    });

    Best mixed = sweep_parallel(n, threads, [&](int k2, Best& best) {
        for (int k1 = 1; k1 < k2; ++k1) {
            for (int j = 1; j < k1; ++j) {
                for (int i = 0; i < j; ++i) {
                    Tensor d = at(j, k2);
                    d -= at(i, k2);
                    d -= at(j, k1);
                    d += at(i, k1);
                    const double num = d.max_abs();
                    sweep_mixed(sw, num, x[static_cast<size_t>(i)], 0.0,
                                x[static_cast<size_t>(j)], x[static_cast<size_t>(k1)],
                                x[static_cast<size_t>(k2)], x[static_cast<size_t>(k1)],
                                x[static_cast<size_t>(k2)] - x[static_cast<size_t>(k1)], alpha,
                                gamma, best);
                }
            }
        }
    });

    NormReport report;
    report.family = "v";
    report.grid_level = grid.level();
    report.norm_1 = finalize(one);
    report.parts.emplace_back("12", finalize(mixed));
    return report;
}

NormReport volterra_norm(const Delta3Fn& f, const NormParams& params, const TimeGrid& grid,
                         int threads) {
    params.validate();
    if (!f) throw std::invalid_argument("volterra_norm: null function");
    check_grid(grid, 2);
    const int n = grid.size();
    if (n > 130) throw std::invalid_argument("volterra_norm: grid too large for the sweep");
    const auto& x = grid.points();
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const EtaZetaSweep sw{params.etas(), params.zetas()};

    std::vector<Tensor> vals(static_cast<size_t>(n) * static_cast<size_t>(n) *
                             static_cast<size_t>(n));
    auto code_of = [&](int i, int j, int k) { return (i * n + j) * n + k; };
    std::vector<int> triples;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j; k < n; ++k) triples.push_back(code_of(i, j, k));
    guarded_parallel(static_cast<int>(triples.size()), threads, [&](int idx, int) {
        const int code = triples[static_cast<size_t>(idx)];
        const int k = code % n;
        const int j = (code / n) % n;
        const int i = code / (n * n);
        vals[static_cast<size_t>(code)] =
            f(x[static_cast<size_t>(i)], x[static_cast<size_t>(j)], x[static_cast<size_t>(k)]);
    });
    auto at = [&](int i, int j, int k) -> const Tensor& {
        return vals[static_cast<size_t>(code_of(i, j, k))];
    };

    Best one = sweep_parallel(n, threads, [&](int k, Best& best) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = at(i, j, k).max_abs();
                const double w = one_norm_weight(x[static_cast<size_t>(i)],
                                                 x[static_cast<size_t>(j)],
                                                 x[static_cast<size_t>(k)], alpha, gamma);
                if (!(w > 0.0) || !std::isfinite(w)) continue;
                best.offer(num / w, {x[static_cast<size_t>(i)], 0.0, x[static_cast<size_t>(j)],
                                     x[static_cast<size_t>(k)], 0.0, 0.0, 0.0});
            }
        }
    });

    Best mixed = sweep_parallel(n, threads, [&](int k2, Best& best) {
        for (int k1 = 1; k1 < k2; ++k1) {
            for (int j = 1; j < k1; ++j) {
                for (int i = 0; i < j; ++i) {
                    Tensor d = at(i, j, k2);
                    d -= at(i, j, k1);
                    const double num = d.max_abs();
                    sweep_mixed(sw, num, x[static_cast<size_t>(i)], 0.0,
                                x[static_cast<size_t>(j)], x[static_cast<size_t>(k1)],
                                x[static_cast<size_t>(k2)], x[static_cast<size_t>(k1)],
                                x[static_cast<size_t>(k2)] - x[static_cast<size_t>(k1)], alpha,
                                gamma, best);
                }
            }
        }
    });

    NormReport report;
    report.family = "v3";
    report.grid_level = grid.level();
    report.norm_1 = finalize(one);
    report.parts.emplace_back("12", finalize(mixed));
    return report;
}

NormReport w_norm(const W2Fn& u, const NormParams& params, const TimeGrid& grid, int threads) {
    params.validate();
    if (!u) throw std::invalid_argument("w_norm: null function");
    check_grid(grid, 2);
    const int n = grid.size();
    if (n > 48) throw std::invalid_argument("w_norm: grid too large for the two-upper sweep");
    const auto& x = grid.points();
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const EtaZetaSweep sw{params.etas(), params.zetas()};

    const size_t nn = static_cast<size_t>(n);
    std::vector<Tensor> vals(nn * nn * nn);
    auto code_of = [&](int j, int a, int b) { return (j * n + a) * n + b; };
    std::vector<int> cells;
    for (int j = 0; j < n; ++j)
        for (int b = j; b < n; ++b)
            for (int a = b; a < n; ++a) cells.push_back(code_of(j, a, b));
    guarded_parallel(static_cast<int>(cells.size()), threads, [&](int idx, int) {
        const int code = cells[static_cast<size_t>(idx)];
        const int b = code % n;
        const int a = (code / n) % n;
        const int j = code / (n * n);
        vals[static_cast<size_t>(code)] =
            u(x[static_cast<size_t>(j)], x[static_cast<size_t>(a)], x[static_cast<size_t>(b)]);
    });
    auto at = [&](int j, int a, int b) -> const Tensor& {
        return vals[static_cast<size_t>(code_of(j, a, b))];
    };

    Best one = sweep_parallel(n, threads, [&](int k, Best& best) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = max_abs_diff(at(j, k, k), at(i, k, k));
                const double w = one_norm_weight(x[static_cast<size_t>(i)],
                                                 x[static_cast<size_t>(j)],
                                                 x[static_cast<size_t>(k)], alpha, gamma);
                if (!(w > 0.0) || !std::isfinite(w)) continue;
                best.offer(num / w, {x[static_cast<size_t>(i)], 0.0, x[static_cast<size_t>(j)],
                                     x[static_cast<size_t>(k)], 0.0, 0.0, 0.0});
            }
        }
    });

    // Varied pair in the lower slot, fixed point r above it.
    Best gt = sweep_parallel(n, threads, [&](int r, Best& best) {
        for (int q = 2; q <= r; ++q) {
            for (int p = 1; p < q; ++p) {
                for (int j = 1; j < p; ++j) {
                    for (int i = 0; i < j; ++i) {
                        Tensor d = at(j, r, q);
                        d -= at(i, r, q);
                        d -= at(j, r, p);
                        d += at(i, r, p);
                        sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                    x[static_cast<size_t>(r)], x[static_cast<size_t>(j)],
                                    x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                    x[static_cast<size_t>(p)],
                                    x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)], alpha,
                                    gamma, best);
                    }
                }
            }
        }
    });

    // Varied pair in the upper slot, fixed point rp below it.
    Best lt = sweep_parallel(n, threads, [&](int q, Best& best) {
        for (int p = 1; p < q; ++p) {
            for (int rp = 1; rp <= p; ++rp) {
                for (int j = 1; j < rp; ++j) {
                    for (int i = 0; i < j; ++i) {
                        Tensor d = at(j, q, rp);
                        d -= at(i, q, rp);
                        d -= at(j, p, rp);
                        d += at(i, p, rp);
                        sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                    x[static_cast<size_t>(rp)], x[static_cast<size_t>(j)],
                                    x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                    x[static_cast<size_t>(rp)],
                                    x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)], alpha,
                                    gamma, best);
                    }
                }
            }
        }
    });

    NormReport report;
    report.family = "w2";
    report.grid_level = grid.level();
    report.norm_1 = finalize(one);
    report.parts.emplace_back("12>", finalize(gt));
    report.parts.emplace_back("12<", finalize(lt));
    return report;
}

NormReport w_norm(const W3Fn& u, const NormParams& params, const TimeGrid& grid, int threads) {
    params.validate();
    if (!u) throw std::invalid_argument("w_norm: null function");
    check_grid(grid, 2);
    const int n = grid.size();
    if (n > 40) throw std::invalid_argument("w_norm: grid too large for the three-upper sweep");
    const auto& x = grid.points();
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const EtaZetaSweep sw{params.etas(), params.zetas()};

    const size_t nn = static_cast<size_t>(n);
    std::vector<Tensor> vals(nn * nn * nn * nn);
    auto code_of = [&](int j, int a, int b, int c) {
        return static_cast<long long>(((j * n + a) * n + b)) * n + c;
    };
    std::vector<long long> cells;
    for (int j = 0; j < n; ++j)
        for (int c = j; c < n; ++c)
            for (int b = c; b < n; ++b)
                for (int a = b; a < n; ++a) cells.push_back(code_of(j, a, b, c));
    guarded_parallel(static_cast<int>(cells.size()), threads, [&](int idx, int) {
        const long long code = cells[static_cast<size_t>(idx)];
        const int c = static_cast<int>(code % n);
        const int b = static_cast<int>((code / n) % n);
        const int a = static_cast<int>((code / (static_cast<long long>(n) * n)) % n);
        const int j = static_cast<int>(code / (static_cast<long long>(n) * n * n));
        vals[static_cast<size_t>(code)] = u(x[static_cast<size_t>(j)], x[static_cast<size_t>(a)],
                                            x[static_cast<size_t>(b)], x[static_cast<size_t>(c)]);
    });
    auto at = [&](int j, int a, int b, int c) -> const Tensor& {
        return vals[static_cast<size_t>(code_of(j, a, b, c))];
    };

    Best one = sweep_parallel(n, threads, [&](int k, Best& best) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = max_abs_diff(at(j, k, k, k), at(i, k, k, k));
                const double w = one_norm_weight(x[static_cast<size_t>(i)],
                                                 x[static_cast<size_t>(j)],
                                                 x[static_cast<size_t>(k)], alpha, gamma);
                if (!(w > 0.0) || !std::isfinite(w)) continue;
                best.offer(num / w, {x[static_cast<size_t>(i)], 0.0, x[static_cast<size_t>(j)],
                                     x[static_cast<size_t>(k)], 0.0, 0.0, 0.0});
            }
        }
    });

    // Pair in the top slot, fixed points m >= c below it.
    Best top = sweep_parallel(n, threads, [&](int q, Best& best) {
        for (int p = 1; p < q; ++p) {
            for (int m = 1; m <= p; ++m) {
                for (int c = 1; c <= m; ++c) {
                    for (int j = 1; j < c; ++j) {
                        for (int i = 0; i < j; ++i) {
                            Tensor d = at(j, q, m, c);
                            d -= at(i, q, m, c);
                            d -= at(j, p, m, c);
                            d += at(i, p, m, c);
                            sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                        x[static_cast<size_t>(c)], x[static_cast<size_t>(j)],
                                        x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                        x[static_cast<size_t>(c)],
                                        x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)],
                                        alpha, gamma, best);
                        }
                    }
                }
            }
        }
    });

    // Pair in the middle slot, fixed points d above and c below.
    Best middle = sweep_parallel(n, threads, [&](int d_idx, Best& best) {
        for (int q = 2; q <= d_idx; ++q) {
            for (int p = 1; p < q; ++p) {
                for (int c = 1; c <= p; ++c) {
                    for (int j = 1; j < c; ++j) {
                        for (int i = 0; i < j; ++i) {
                            Tensor d = at(j, d_idx, q, c);
                            d -= at(i, d_idx, q, c);
                            d -= at(j, d_idx, p, c);
                            d += at(i, d_idx, p, c);
                            sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                        x[static_cast<size_t>(c)], x[static_cast<size_t>(j)],
                                        x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                        x[static_cast<size_t>(c)],
                                        x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)],
                                        alpha, gamma, best);
                        }
                    }
                }
            }
        }
    });

    // Pair in the bottom slot, fixed points d >= m above it.
    Best bottom = sweep_parallel(n, threads, [&](int d_idx, Best& best) {
        for (int m = 2; m <= d_idx; ++m) {
            for (int q = 2; q <= m; ++q) {
                for (int p = 1; p < q; ++p) {
                    for (int j = 1; j < p; ++j) {
                        for (int i = 0; i < j; ++i) {
                            Tensor d = at(j, d_idx, m, q);
                            d -= at(i, d_idx, m, q);
                            d -= at(j, d_idx, m, p);
                            d += at(i, d_idx, m, p);
                            sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                        x[static_cast<size_t>(m)], x[static_cast<size_t>(j)],
                                        x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                        x[static_cast<size_t>(p)],
                                        x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)],
                                        alpha, gamma, best);
                        }
                    }
                }
            }
        }
    });

    NormReport report;
    report.family = "w3";
    report.grid_level = grid.level();
    report.norm_1 = finalize(one);
    report.parts.emplace_back("12>", finalize(middle));
    report.parts.emplace_back("12<", finalize(top));
    report.parts.emplace_back("13>", finalize(bottom));
    report.parts.emplace_back("13<", finalize(top));
    report.parts.emplace_back("23>", finalize(bottom));
    report.parts.emplace_back("23<", finalize(middle));
    return report;
}

NormReport w_norm_increment(const W2IncrementFn& r, const NormParams& params, const TimeGrid& grid,
                            int threads) {
    params.validate();
    if (!r) throw std::invalid_argument("w_norm_increment: null function");
    check_grid(grid, 2);
    const int n = grid.size();
    if (n > 40) throw std::invalid_argument("w_norm_increment: grid too large");
    const auto& x = grid.points();
    const double alpha = params.alpha;
    const double gamma = params.gamma;
    const EtaZetaSweep sw{params.etas(), params.zetas()};

    const size_t nn = static_cast<size_t>(n);
    std::vector<Tensor> vals(nn * nn * nn * nn);
    auto code_of = [&](int i, int j, int a, int b) {
        return static_cast<long long>(((i * n + j) * n + a)) * n + b;
    };
    std::vector<long long> cells;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int b = j; b < n; ++b)
                for (int a = b; a < n; ++a) cells.push_back(code_of(i, j, a, b));
    guarded_parallel(static_cast<int>(cells.size()), threads, [&](int idx, int) {
        const long long code = cells[static_cast<size_t>(idx)];
        const int b = static_cast<int>(code % n);
        const int a = static_cast<int>((code / n) % n);
        const int j = static_cast<int>((code / (static_cast<long long>(n) * n)) % n);
        const int i = static_cast<int>(code / (static_cast<long long>(n) * n * n));
        vals[static_cast<size_t>(code)] = r(x[static_cast<size_t>(i)], x[static_cast<size_t>(j)],
                                            x[static_cast<size_t>(a)], x[static_cast<size_t>(b)]);
    });
    auto at = [&](int i, int j, int a, int b) -> const Tensor& {
        return vals[static_cast<size_t>(code_of(i, j, a, b))];
    };

    Best one = sweep_parallel(n, threads, [&](int k, Best& best) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = at(i, j, k, k).max_abs();
                const double w = one_norm_weight(x[static_cast<size_t>(i)],
                                                 x[static_cast<size_t>(j)],
                                                 x[static_cast<size_t>(k)], alpha, gamma);
                if (!(w > 0.0) || !std::isfinite(w)) continue;
                best.offer(num / w, {x[static_cast<size_t>(i)], 0.0, x[static_cast<size_t>(j)],
                                     x[static_cast<size_t>(k)], 0.0, 0.0, 0.0});
            }
        }
    });

    Best gt = sweep_parallel(n, threads, [&](int rr, Best& best) {
        for (int q = 2; q <= rr; ++q) {
            for (int p = 1; p < q; ++p) {
                for (int j = 1; j < p; ++j) {
                    for (int i = 0; i < j; ++i) {
                        Tensor d = at(i, j, rr, q);
                        d -= at(i, j, rr, p);
                        sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                    x[static_cast<size_t>(rr)], x[static_cast<size_t>(j)],
                                    x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                    x[static_cast<size_t>(p)],
                                    x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)], alpha,
                                    gamma, best);
                    }
                }
            }
        }
    });

    Best lt = sweep_parallel(n, threads, [&](int q, Best& best) {
        for (int p = 1; p < q; ++p) {
            for (int rp = 1; rp <= p; ++rp) {
                for (int j = 1; j < rp; ++j) {
                    for (int i = 0; i < j; ++i) {
                        Tensor d = at(i, j, q, rp);
                        d -= at(i, j, p, rp);
                        sweep_mixed(sw, d.max_abs(), x[static_cast<size_t>(i)],
                                    x[static_cast<size_t>(rp)], x[static_cast<size_t>(j)],
                                    x[static_cast<size_t>(p)], x[static_cast<size_t>(q)],
                                    x[static_cast<size_t>(rp)],
                                    x[static_cast<size_t>(q)] - x[static_cast<size_t>(p)], alpha,
                                    gamma, best);
                    }
                }
            }
        }
    });

    NormReport report;
    report.family = "w2i";
    report.grid_level = grid.level();
    report.norm_1 = finalize(one);
    report.parts.emplace_back("12>", finalize(gt));
    report.parts.emplace_back("12<", finalize(lt));
    return report;
}

ControlledNormBreakdown controlled_norm_breakdown(const ControlledPath& y,
                                                  const VolterraSignature& sig,
                                                  const NormParams& params, const TimeGrid& grid,
                                                  const ConvOptions& opts, int threads) {
    params.validate();
    const double rho = params.rho();

    NormParams p3 = params;
    p3.alpha = 3.0 * rho + 3.0 * params.gamma;
    p3.gamma = 3.0 * params.gamma;
    NormParams p2 = params;
    p2.alpha = 2.0 * rho + 2.0 * params.gamma;
    p2.gamma = 2.0 * params.gamma;

    ControlledNormBreakdown out;
    out.cherry = w_norm(W3Fn([&](double t, double a, double b, double c) {
                            return y.cherry(t, a, b, c);
                        }),
                        params, grid, threads)
                     .total();
    out.pair = w_norm(W3Fn([&](double t, double a, double b, double c) {
                          return y.pair(t, a, b, c);
                      }),
                      params, grid, threads)
                   .total();
    out.remainder_y = volterra_norm(Delta3Fn([&](double s, double t, double tau) {
                                        return remainder_y(sig, y, s, t, tau, opts);
                                    }),
                                    p3, grid, threads)
                          .total();
    out.remainder_dot = w_norm_increment(W2IncrementFn([&](double s, double t, double a, double b) {
                                             return remainder_dot(sig, y, s, t, a, b, opts);
                                         }),
                                         p2, grid, threads)
                            .total();
    return out;
}

double controlled_norm(const ControlledPath& y, const VolterraSignature& sig,
                       const NormParams& params, const TimeGrid& grid, const ConvOptions& opts,
                       int threads) {
    return controlled_norm_breakdown(y, sig, params, grid, opts, threads).total();
}

EmbeddingAudit embedding_audit(const Delta2Fn& f, const NormParams& fine, const NormParams& coarse,
                               const TimeGrid& grid, int threads) {
    fine.validate();
    coarse.validate();
    if (!f) throw std::invalid_argument("embedding_audit: null function");
    if (coarse.alpha > fine.alpha)
        throw std::invalid_argument("embedding_audit: coarse alpha must not exceed fine alpha");
    if (std::abs(coarse.gamma - fine.gamma) > 1e-12)
        throw std::invalid_argument("embedding_audit: gamma must match between parameter sets");
    check_grid(grid, 2);

    const int n = grid.size();
    if (n > 130) throw std::invalid_argument("embedding_audit: grid too large for the sweep");
    const auto& x = grid.points();
    const double T = grid.b() - grid.a();
    const double tfac = std::pow(T, fine.alpha - coarse.alpha);
    const double slack = 1e-9;

    std::vector<Tensor> vals(static_cast<size_t>(n) * static_cast<size_t>(n));
    std::vector<int> pairs;
    for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) pairs.push_back(i * n + k);
    guarded_parallel(static_cast<int>(pairs.size()), threads, [&](int idx, int) {
        const int code = pairs[static_cast<size_t>(idx)];
        vals[static_cast<size_t>(code)] =
            f(x[static_cast<size_t>(code / n)], x[static_cast<size_t>(code % n)]);
    });
    auto at = [&](int i, int k) -> const Tensor& { return vals[static_cast<size_t>(i * n + k)]; };

    EmbeddingAudit audit;
    audit.t_factor = tfac;

    Best fine_one, fine_mixed, coarse_one, coarse_mixed;
    const EtaZetaSweep sw{coarse.etas(), coarse.zetas()};

    for (int k = 1; k < n; ++k) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = max_abs_diff(at(j, k), at(i, k));
                const double s = x[static_cast<size_t>(i)];
                const double t = x[static_cast<size_t>(j)];
                const double tau = x[static_cast<size_t>(k)];
                const double wf = one_norm_weight(s, t, tau, fine.alpha, fine.gamma);
                const double wc = one_norm_weight(s, t, tau, coarse.alpha, coarse.gamma);
                if (!(wf > 0.0) || !(wc > 0.0) || !std::isfinite(wf) || !std::isfinite(wc))
                    continue;
                const double rf = num / wf;
                const double rc = num / wc;
                const TupleKey key{s, 0.0, t, tau, 0.0, 0.0, 0.0};
                fine_one.offer(rf, key);
                coarse_one.offer(rc, key);
                audit.tuples_checked += 1;
                if (num > 0.0 && rf > 0.0) {
                    const double margin = rc / (tfac * rf);
                    audit.worst_margin = std::max(audit.worst_margin, margin);
                    if (margin > 1.0 + slack) audit.violations += 1;
                }
            }
        }
    }

    for (int k2 = 2; k2 < n; ++k2) {
        for (int k1 = 1; k1 < k2; ++k1) {
            for (int j = 1; j < k1; ++j) {
                for (int i = 0; i < j; ++i) {
                    Tensor d = at(j, k2);
                    d -= at(i, k2);
                    d -= at(j, k1);
                    d += at(i, k1);
                    const double num = d.max_abs();
                    const double s = x[static_cast<size_t>(i)];
                    const double t = x[static_cast<size_t>(j)];
                    const double mn = x[static_cast<size_t>(k1)];
                    const double gap = x[static_cast<size_t>(k2)] - x[static_cast<size_t>(k1)];
                    for (double eta : sw.etas) {
                        for (double zeta : sw.zetas) {
                            const double wf =
                                mixed_weight(s, t, mn, gap, eta, zeta, fine.alpha, fine.gamma);
                            const double wc =
                                mixed_weight(s, t, mn, gap, eta, zeta, coarse.alpha, coarse.gamma);
                            if (!(wf > 0.0) || !(wc > 0.0) || !std::isfinite(wf) ||
                                !std::isfinite(wc))
                                continue;
                            const double rf = num / wf;
                            const double rc = num / wc;
                            const TupleKey key{s,   0.0, t,    x[static_cast<size_t>(k1)],
                                               x[static_cast<size_t>(k2)], eta,  zeta};
                            fine_mixed.offer(rf, key);
                            coarse_mixed.offer(rc, key);
                            audit.tuples_checked += 1;
                            if (num > 0.0 && rf > 0.0) {
                                const double margin = rc / (tfac * rf);
                                audit.worst_margin = std::max(audit.worst_margin, margin);
                                if (margin > 1.0 + slack) audit.violations += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    audit.lhs = finalize(coarse_one).value + finalize(coarse_mixed).value;
    audit.rhs = tfac * (finalize(fine_one).value + finalize(fine_mixed).value);

    // Chain of spaces with exponents (3 rho + a gamma, a gamma), a = 1, 2, 3.
    const double rho = fine.rho();
    const double gamma = fine.gamma;
    audit.chain_constants = {std::pow(2.0, 3.0 * rho), std::pow(2.0, 1.5 * rho)};
    std::array<Best, 3> chain_best;
    for (int k = 1; k < n; ++k) {
        for (int j = 1; j <= k; ++j) {
            for (int i = 0; i < j; ++i) {
                const double num = max_abs_diff(at(j, k), at(i, k));
                const double s = x[static_cast<size_t>(i)];
                const double t = x[static_cast<size_t>(j)];
                const double tau = x[static_cast<size_t>(k)];
                std::array<double, 3> ratio{};
                bool usable = true;
                for (int a = 1; a <= 3; ++a) {
                    const double w = one_norm_weight(s, t, tau, 3.0 * rho + a * gamma, a * gamma);
                    if (!(w > 0.0) || !std::isfinite(w)) {
                        usable = false;
                        break;
                    }
                    ratio[static_cast<size_t>(a - 1)] = num / w;
                }
                if (!usable) continue;
                const TupleKey key{s, 0.0, t, tau, 0.0, 0.0, 0.0};
                for (int a = 0; a < 3; ++a) chain_best[static_cast<size_t>(a)].offer(ratio[static_cast<size_t>(a)], key);
                if (num > 0.0) {
                    audit.chain_checked += 1;
                    for (int a = 0; a < 2; ++a) {
                        const double lim = audit.chain_constants[static_cast<size_t>(a)] *
                                           ratio[static_cast<size_t>(a + 1)];
                        if (lim > 0.0) {
                            const double margin = ratio[static_cast<size_t>(a)] / lim;
                            audit.chain_worst = std::max(audit.chain_worst, margin);
                            if (margin > 1.0 + slack) audit.chain_violations += 1;
                        }
                    }
                }
            }
        }
    }
    for (int a = 0; a < 3; ++a)
        audit.chain_norms[static_cast<size_t>(a)] = finalize(chain_best[static_cast<size_t>(a)]).value;
    return audit;
}

}  // namespace volterra
