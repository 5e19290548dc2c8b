#pragma once

#include <array>
#include <string>
#include <vector>

#include "volterra/grid.hpp"

namespace volterra {

enum class KernelFamily { Fractional, Constant, DampedFractional };

// Singular Volterra kernel k(tau, r), defined for r < tau (r <= tau when the
// order is zero). All built-in families are convolution kernels phi(tau - r),
// with order gamma in [0, 1) measuring the diagonal singularity.
class Kernel {
public:
    static Kernel fractional(double gamma);          // (tau-r)^(-gamma)
    static Kernel constant();                        // 1, order 0
    static Kernel damped_fractional(double gamma, double lambda);  // (tau-r)^(-gamma) e^(-lambda (tau-r))

    KernelFamily family() const { return family_; }
    double order() const { return gamma_; }
    const std::string& name() const { return name_; }

    double operator()(double tau, double r) const { return eval_dist(tau - r); }
    // Evaluation from the diagonal distance tau - r; callers keep this stable
    // near the diagonal by forming the distance from interval endpoints.
    double eval_dist(double dist) const;

    // Closed-form weighted moments over [a, b] with b <= tau:
    //   moment0 = integral of k(tau, r) dr
    //   moment1 = integral of (r - c) k(tau, r) dr
    // Only families with has_primitive() provide them.
    bool has_primitive() const;
    double moment0(double tau, double a, double b) const;
    double moment1(double tau, double a, double b, double c) const;

private:
    Kernel(KernelFamily f, double gamma, double lambda, std::string name);

    KernelFamily family_;
    double gamma_;
    double lambda_;
    std::string name_;
};

struct KernelBoundResult {
    std::string label;
    double constant = 0.0;            // empirical sup of |lhs| / weight
    std::array<double, 4> tuple{};    // attaining (s, r, q, tau); unused slots 0
    double sweep_value = 0.0;         // eta or beta attaining the sup
    long skipped = 0;                 // tuples excluded (diagonal band / zero weight)
};

struct KernelAuditReport {
    double gamma = 0.0;
    double band = 0.0;                // diagonal exclusion width
    std::vector<KernelBoundResult> bounds;
    double max_constant() const;
};

// Empirical constants for the five singular-kernel bounds, swept over grid
// tuples (s, r, q, tau) with eta, beta in {0, 0.25, 0.5, 0.75, 1}. Tuples with
// tau - r below T * 2^-(level+2) are skipped and counted.
KernelAuditReport audit_kernel_bounds(const Kernel& k, const TimeGrid& grid, int threads = 1);

}  // namespace volterra
