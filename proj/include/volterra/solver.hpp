#pragma once

#include <utility>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/grid.hpp"
#include "volterra/signature.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// Fixed-point solution of y_t^tau = y0 + int_0^t k(tau, r) dx_r f(y_r^r).
// The Picard operator evaluates the integral in closed form against the
// piecewise-linear interpolant of the integrand's diagonal trace on a master
// dyadic grid (kernel moments per piece, exact for polynomial pieces), so one
// application costs O(grid^2) and iterates converge to the grid fixed point at
// machine-level reproducibility. Derivative slots are maintained through
// compose, giving the bundle (y0 + int k dx f(y), f(y), f(y) f'(y), 0).

struct SolverOptions {
    double alpha = 0.0;      // driver regularity; 0 = take the driver's alpha_hint
    double gamma = -1.0;     // kernel order; negative = take it from the kernel
    double beta = 0.0;       // auxiliary exponent, beta < alpha and beta - gamma > 1/4;
                             // 0 = alpha - (alpha - gamma - 1/4) / 2
    int max_picard = 50;     // iteration cap per step
    double picard_tol = 1e-9;   // stop when the diagonal sup-distance falls below
    double step_shrink = 0.5;   // step cap factor applied on each retry
    int grid_level = 10;     // master dyadic grid level on [0, T]
    double c_hat0 = 1e-4;    // initial empirical constant, doubled per failed step
    int threads = 1;
    std::vector<double> tau_slices;  // extra kernel upper arguments for the trace
};

struct StepDiagnostics {
    double t0 = 0.0;
    double t1 = 0.0;
    int iters = 0;
    double q_hat = 0.0;  // max ratio of successive iterate distances
    int retries = 0;
    double c_hat = 0.0;
};

struct SolutionTrace {
    std::vector<double> times;     // master grid
    std::vector<Tensor> diagonal;  // y_t^t, shape [m]; starts at y0
    std::vector<double> slice_taus;
    std::vector<std::vector<Tensor>> slices;  // slices[j][i] = y^{tau_j}_{t_i}, t_i <= tau_j
    std::vector<StepDiagnostics> steps;
};

// One application of the Picard map on [interval.first, interval.second]. The
// input must be a D-hat bundle whose data at the left endpoint a equals
// (y0, f(y0), f(y0) f'(y0), 0) with y0 = y_a^a (InitialBundleMismatch
// otherwise). The output value is y^tau_a + int_a^t k(tau, r) dx_r f(y_r^r)
// with the integrand interpolated on the interval's master grid; its dot and
// cherry slots are the composed integrand's value and dot.
ControlledPath picard_map(const VolterraSignature& sig, const SmoothFunction& f,
                          const ControlledPath& y, std::pair<double, double> interval,
                          const SolverOptions& opts = {});

// Step length from the invariant-ball and contraction conditions:
// T-hat = min(remaining, ball bound, contraction bound) where the contraction
// requirement is q = c_hat M T-hat^(alpha-beta) <= 1/2 and the ball bound
// carries the (1+M^4)(1+Q^3) growth of the integral map. M = 0 disables both
// bounds. Throws StepUnderflow when the bounds push T-hat below
// horizon * 1e-6 while the horizon itself allows more.
double choose_step(double M, double Q, double alpha, double beta, double c_hat, double remaining,
                   double horizon);

// Marches [0, T] in steps chosen by choose_step, iterating the Picard map on
// each window of the master grid until the diagonal sup-distance falls below
// picard_tol, restarting from the bundle (y, f(y), f(y) f'(y), 0) at each
// patch node. A step that fails to contract doubles c_hat, shrinks the step
// cap by step_shrink and retries; NoConvergence after the cap underflows.
SolutionTrace solve(const VolterraSignature& sig, const SmoothFunction& f, const Tensor& y0,
                    double T, const SolverOptions& opts = {});

// D-hat bundle rebuilt from a trace: the value closure integrates the stored
// diagonal through the kernel moments, so feeding it back to picard_map
// reproduces the trace within the iteration tolerance.
ControlledPath solution_path(const VolterraSignature& sig, const SmoothFunction& f,
                             const SolutionTrace& trace, const SolverOptions& opts = {});

}  // namespace volterra
