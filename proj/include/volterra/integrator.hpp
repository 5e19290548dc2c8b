#pragma once

#include <functional>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/grid.hpp"
#include "volterra/quadrature.hpp"
#include "volterra/sewing.hpp"
#include "volterra/signature.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// Rough Volterra integration of a controlled path against the signature.
// Throughout, rho = alpha - gamma with alpha the driver regularity and gamma
// the kernel order; the sewing defect order is beta = 4 rho + gamma, which
// requires rho > 1/4 (ExponentError otherwise).

struct IntegrateOptions {
    double alpha = 0.0;  // driver regularity; 0 = take the driver's alpha_hint
    int max_level = 14;  // sewing refinement cap
    int threads = 1;     // parallelism across grid samples
    DeOptions quad;      // quadrature for the in-cell germ corrections
    std::vector<double> tau_slices;  // extra kernel upper arguments to sample
};

// Germ of the integral on one cell [u, v] with kernel upper argument tau: the
// four signature blocks applied to the controlled components frozen at the
// cell base u, each corrected by the kernel-weighted integral of its recentred
// integrand, so the returned cell value is the exact iterated integral of the
// frozen-lower-time expansion. The Pair block is dropped on D-hat bundles.
// The integrand's value shape must end in the driver dimension; the result
// drops that index.
Tensor integral_germ(const VolterraSignature& sig, const ControlledPath& y, double u, double v,
                     double tau, const IntegrateOptions& opts = {});

struct RoughIntegralValue {
    Tensor value;
    SewingDiagnostics diagnostics;
};

// w^tau_{ts}: limit of germ sums over refining dyadic partitions of [s, t].
// Requires s <= t <= tau. tol is the sewing Cauchy threshold (0 = auto,
// < 0 = diagnostics mode running all levels). Additive in the time interval up
// to twice the sewing tolerance.
RoughIntegralValue rough_integral(const VolterraSignature& sig, const ControlledPath& y, double s,
                                  double t, double tau, double tol,
                                  const IntegrateOptions& opts = {});

struct IntegralSample {
    double t = 0.0;
    double tau = 0.0;
    Tensor value;
};

// Integral as a controlled path. w evaluates from the grid origin and is
// memoized on exact argument bits, safe for concurrent use. as_controlled is
// the D-hat bundle (w, y value, y dot, 0); diagnostics comes from the
// full-interval diagonal run; samples holds the grid diagonal first, then the
// requested tau slices, in grid order.
struct RoughIntegralResult {
    std::function<Tensor(double t, double tau)> w;
    ControlledPath as_controlled;
    SewingDiagnostics diagnostics;
    std::vector<IntegralSample> samples;
};

RoughIntegralResult integrate_to_controlled(const VolterraSignature& sig, const ControlledPath& y,
                                            const TimeGrid& grid, double tol,
                                            const IntegrateOptions& opts = {});

}  // namespace volterra
