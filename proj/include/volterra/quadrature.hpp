#pragma once

#include <functional>
#include <vector>

#include "volterra/tensor.hpp"

namespace volterra {

// Double-exponential (tanh-sinh) quadrature on a finite interval. Node positions
// are stored together with their exact distances to both endpoints so integrands
// with endpoint singularities can be evaluated without cancellation. Levels are
// nested: level l+1 adds the odd multiples of its spacing, so refinement reuses
// all previous evaluations and |I_{l+1} - I_l| serves as the error estimate.

struct DeOptions {
    int min_level = 2;
    int max_level = 7;
    double tol = 1e-10;  // relative to max(1, |I|)
};

struct DeResult {
    Tensor value;
    double err = 0.0;
    int level = 0;
    bool converged = true;
};

// f(r, dist_upper, dist_lower, out): fill out (size = product of shape) with the
// integrand at r; dist_upper = b - r and dist_lower = r - a, both computed stably.
using DeIntegrand = std::function<void(double r, double dist_upper, double dist_lower, double* out)>;

DeResult de_integrate(const std::vector<int>& shape, const DeIntegrand& f, double a, double b,
                      const DeOptions& opts = {});

double de_integrate_scalar(const std::function<double(double, double, double)>& f, double a,
                           double b, const DeOptions& opts = {});

// Internal node layout, exposed for tests: nodes on (-1,1) with stable endpoint
// offsets 1-u and 1+u. new_at_level(0) is the full coarsest rule; higher levels
// hold only the nodes added at that spacing.
struct DeNode {
    double u;
    double one_minus;  // 1 - u
    double one_plus;   // 1 + u
    double weight;     // before the spacing factor h
};

const std::vector<DeNode>& de_nodes_new_at_level(int level);

class Kernel;
class DrivingPath;

// Integral over [a, b] of an integrand built from the kernel-weighted fiber
// fiber(r) = k(tau, r) x'(r) in R^d. fill(r, fiber, out) writes the full output
// tensor at node r. The interval is split at the driver's sample times for
// piecewise-linear paths, and tau - r is always formed as (tau - piece_end) +
// dist_upper so the diagonal singularity stays exact. Throws
// QuadratureNotConverged when a piece stalls beyond stall_tol (relative).
using NodeFill = std::function<void(double r, const double* fiber, double* out)>;
Tensor kernel_weighted_integral(const Kernel& k, const DrivingPath& x, double a, double b,
                                double tau, const std::vector<int>& shape, const NodeFill& fill,
                                const DeOptions& opts = {}, double stall_tol = 1e-6);

}  // namespace volterra
