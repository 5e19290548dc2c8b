#include "volterra/sewing.hpp"

#include <cmath>
#include <stdexcept>

#include "volterra/errors.hpp"
#include "volterra/parallel.hpp"

namespace volterra {

void SewingExponents::validate(bool double_singularity) const {
    if (!(beta > 1.0)) throw std::invalid_argument("sewing requires beta > 1");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("sewing requires kappa in (0,1)");
    if (theta < 0.0) throw std::invalid_argument("sewing requires theta >= 0");
    if (double_singularity && !(theta > 0.0))
        throw std::invalid_argument("double-singularity sewing requires theta > 0");
    if (!(kappa + theta < 1.0)) throw std::invalid_argument("sewing requires kappa + theta < 1");
    if (!(beta - kappa - theta > 0.0))
        throw std::invalid_argument("sewing requires beta - kappa - theta > 0");
}

double fit_decay_slope(const std::vector<double>& diffs, int first, int last) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int k = first; k <= last && k < static_cast<int>(diffs.size()); ++k) {
        if (!(diffs[k] > 0.0)) continue;
        const double x = k;
        const double y = -std::log2(diffs[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

namespace {

// Shared dyadic engine; cell(u, v) evaluates the germ over one partition cell.
SewResult run_sewing(const std::function<Tensor(double, double)>& cell, double a, double b,
                     const SewOptions& opts) {
    if (!(a <= b)) throw std::invalid_argument("sewing interval requires a <= b");
    if (opts.max_level < 0 || opts.max_level > 24)
        throw std::invalid_argument("sewing max_level out of range [0,24]");

    SewResult res;
    Tensor current = cell(a, b);
    if (a == b) {
        res.value = std::move(current);
        res.diagnostics.converged = true;
        return res;
    }
    if (!current.all_finite())
        throw NumericalError("overflow", "sewing germ is non-finite on the full interval");

    const bool diagnostics_mode = opts.tol < 0.0;
    const double eff_tol =
        opts.tol > 0.0 ? opts.tol : 1e-9 * std::max(1.0, current.max_abs());
    const auto shape = current.shape();
    const double span = b - a;

    auto level_sum = [&](int level) {
        const int cells = 1 << level;
        const double inv = std::ldexp(1.0, -level);
        std::vector<Tensor> parts(cells);
        parallel_for(cells, opts.threads, [&](int i, int) {
            const double u = a + span * (i * inv);
            const double v = a + span * ((i + 1) * inv);
            parts[static_cast<size_t>(i)] = cell(u, v);
        });
        int width = cells;
        while (width > 1) {
            const int half = width / 2;
            for (int i = 0; i < half; ++i) {
                parts[static_cast<size_t>(i)] = parts[static_cast<size_t>(2 * i)];
                parts[static_cast<size_t>(i)] += parts[static_cast<size_t>(2 * i + 1)];
            }
            width = half;
        }
        return parts[0];
    };

    int nondecreasing = 0;
    for (int level = 1; level <= opts.max_level; ++level) {
        Tensor next = level_sum(level);
        if (!next.all_finite())
            throw NumericalError("overflow",
                                 "sewing level sum is non-finite near the diagonal; check kappa");
        const double diff = max_abs_diff(next, current);
        res.diagnostics.level_diffs.push_back(diff);
        res.diagnostics.levels_used = level;
        current = std::move(next);
        if (!diagnostics_mode && diff <= eff_tol) {
            res.diagnostics.converged = true;
            break;
        }
        const size_t nd = res.diagnostics.level_diffs.size();
        if (nd >= 2 && diff >= res.diagnostics.level_diffs[nd - 2])
            ++nondecreasing;
        else
            nondecreasing = 0;
        if (!diagnostics_mode && nondecreasing >= 4)
            throw NonCauchy("sewing sums are not Cauchy over 4 consecutive levels");
    }
    if (diagnostics_mode && !res.diagnostics.level_diffs.empty())
        res.diagnostics.converged = res.diagnostics.level_diffs.back() <= eff_tol;

    const int nd = static_cast<int>(res.diagnostics.level_diffs.size());
    int positive = 0;
    for (double d : res.diagnostics.level_diffs)
        if (d > 0.0) ++positive;
    if (positive >= 3) {
        res.diagnostics.fitted_slope = fit_decay_slope(res.diagnostics.level_diffs, 0, nd - 1);
        res.diagnostics.slope_available = true;
    }
    res.value = std::move(current);
    return res;
}

}  // namespace

SewResult sew_single(const SingleGerm& xi, const SewingExponents& exps, double a, double b,
                     double tau, const SewOptions& opts) {
    exps.validate(false);
    if (!(b <= tau + 1e-12 * std::max(1.0, std::abs(tau))))
        throw std::invalid_argument("sew_single requires b <= tau");
    return run_sewing([&](double u, double v) { return xi(u, v, tau); }, a, b, opts);
}

SewResult sew_double(const DoubleGerm& xi, const SewingExponents& exps, double base, double a,
                     double b, double tau, const SewOptions& opts) {
    if (base == a && exps.theta >= 1.0)
        throw SingularBase("double-singularity sewing with base == s needs theta < 1");
    exps.validate(true);
    if (!(base <= a)) throw std::invalid_argument("sew_double requires base <= s");
    if (!(b <= tau + 1e-12 * std::max(1.0, std::abs(tau))))
        throw std::invalid_argument("sew_double requires t <= tau");
    return run_sewing([&](double u, double v) { return xi(base, u, v, tau); }, a, b, opts);
}

}  // namespace volterra
