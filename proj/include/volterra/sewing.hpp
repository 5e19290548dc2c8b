#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "volterra/tensor.hpp"

namespace volterra {

// Exponent data for the sewing engines. beta is the defect order, kappa the
// upper-endpoint singularity weight, theta the base-point weight (0 for the
// single-singularity map), (alpha, gamma) the regularity pair of the output.
struct SewingExponents {
    double beta = 0.0;
    double kappa = 0.0;
    double theta = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;

    void validate(bool double_singularity) const;  // throws std::invalid_argument
};

struct SewingDiagnostics {
    std::vector<double> level_diffs;  // level_diffs[k] = |I^{k+1} - I^k| in max-norm
    double fitted_slope = 0.0;        // decay exponent: least-squares slope of -log2(diff) vs level
    bool slope_available = false;     // requires at least 3 positive diffs
    bool converged = false;
    int levels_used = 0;
};

struct SewResult {
    Tensor value;
    SewingDiagnostics diagnostics;
};

struct SewOptions {
    // tol > 0: explicit Cauchy threshold. tol == 0: auto, 1e-9 x max(1, |I^0|).
    // tol < 0: diagnostics mode, run every level to max_level and never throw
    // NonCauchy (used for rate studies).
    double tol = 0.0;
    int max_level = 14;
    int threads = 1;
};

using SingleGerm = std::function<Tensor(double s, double t, double tau)>;
using DoubleGerm = std::function<Tensor(double base, double s, double t, double tau)>;

// Dyadic Riemann sums I^n = sum over cells [u,v] of P^n([a,b]) of xi(u,v,tau),
// iterated until consecutive sums are Cauchy. Cells are summed by a fixed
// pairwise tree reduction, so the value is independent of opts.threads.
// Throws NonCauchy when the diffs fail to decrease over 4 consecutive levels,
// and NumericalError("overflow") when a level sum leaves the finite range.
SewResult sew_single(const SingleGerm& xi, const SewingExponents& exps, double a, double b,
                     double tau, const SewOptions& opts = {});

// Same engine for germs carrying an additional singular base point v <= a.
// Throws SingularBase when base == a is combined with theta >= 1.
SewResult sew_double(const DoubleGerm& xi, const SewingExponents& exps, double base, double a,
                     double b, double tau, const SewOptions& opts = {});

// Least-squares decay exponent of -log2(diffs[k]) vs k over k in [first, last].
double fit_decay_slope(const std::vector<double>& diffs, int first, int last);

}  // namespace volterra
