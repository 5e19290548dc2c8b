#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "volterra/controlled.hpp"
#include "volterra/grid.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// Exponent pair (alpha, gamma) plus the finite (eta, zeta) sweeps that replace
// the continuous suprema in the weighted norms. Empty sweeps mean defaults:
// eta in {0, 1/4, 1/2, 3/4, 1}, zeta in {0, rho/4, rho/2, 3rho/4} with
// rho = alpha - gamma.
struct NormParams {
    double alpha = 0.8;
    double gamma = 0.25;
    std::vector<double> eta_sweep;
    std::vector<double> zeta_sweep;

    double rho() const { return alpha - gamma; }
    std::vector<double> etas() const;
    std::vector<double> zetas() const;
    void validate() const;
};

// Coordinates of the tuple attaining a norm estimate. Unused columns stay 0.
// For two-upper-argument families, (tau1, tau2) is the varied pair and u the
// remaining fixed upper point; for three-upper families u holds the smallest
// fixed upper point (so min(u, tau1) recovers the weight anchor) and the
// topmost fixed point is only visible through the JSON report.
struct AttainingTuple {
    double s = 0.0;
    double u = 0.0;
    double t = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    double eta = 0.0;
    double zeta = 0.0;
};

struct NormPart {
    double value = 0.0;
    AttainingTuple at;
};

// Grid estimate of a weighted norm: a lower bound for the supremum, reported
// with the attaining tuple (lexicographically smallest on ties). Ratios above
// 1e12 are clamped to +infinity as an exponent-mismatch diagnostic.
struct NormReport {
    std::string family;
    int grid_level = -1;
    NormPart norm_1;
    std::vector<std::pair<std::string, NormPart>> parts;

    double norm_12() const;
    double norm_123() const;
    double total() const;
    bool infinite() const;
    const NormPart* part(const std::string& label) const;
};

using Delta2Fn = std::function<Tensor(double t, double tau)>;
using Delta3Fn = std::function<Tensor(double s, double t, double tau)>;
using W2Fn = std::function<Tensor(double t, double a, double b)>;
using W3Fn = std::function<Tensor(double t, double a, double b, double c)>;
using W2IncrementFn = std::function<Tensor(double s, double t, double a, double b)>;

// (alpha, gamma) norm of a two-parameter path z_t^tau; increments in the base
// variable are formed internally. Parts: "1" and "12".
NormReport volterra_norm(const Delta2Fn& f, const NormParams& params, const TimeGrid& grid,
                         int threads = 1);

// Same weights for a function given directly on Delta_3 (remainder style);
// no base increments are formed.
NormReport volterra_norm(const Delta3Fn& f, const NormParams& params, const TimeGrid& grid,
                         int threads = 1);

// Two-upper-argument norm: diagonal part "1" plus mixed parts "12>", "12<".
// u(t, a, b) must be defined for a >= b >= t on the grid.
NormReport w_norm(const W2Fn& u, const NormParams& params, const TimeGrid& grid, int threads = 1);

// Three-upper-argument norm: diagonal part "1" plus the six mixed parts
// "12>", "12<", "13>", "13<", "23>", "23<". u(t, a, b, c) must be defined for
// a >= b >= c >= t on the grid.
NormReport w_norm(const W3Fn& u, const NormParams& params, const TimeGrid& grid, int threads = 1);

// Two-upper-argument norm for increment-style data R(s, t, a, b) (remainders
// of the derivative slot). Same parts as the path-style overload.
NormReport w_norm_increment(const W2IncrementFn& r, const NormParams& params, const TimeGrid& grid,
                            int threads = 1);

struct ControlledNormBreakdown {
    double cherry = 0.0;
    double pair = 0.0;
    double remainder_y = 0.0;
    double remainder_dot = 0.0;
    double total() const { return cherry + pair + remainder_y + remainder_dot; }
};

// Semi-norm of a controlled bundle: cherry and pair slots in the (alpha, gamma)
// three-upper norm, R^y in the (3rho+3gamma, 3gamma) evaluation norm, R^dot in
// the (2rho+2gamma, 2gamma) two-upper increment norm.
ControlledNormBreakdown controlled_norm_breakdown(const ControlledPath& y,
                                                  const VolterraSignature& sig,
                                                  const NormParams& params, const TimeGrid& grid,
                                                  const ConvOptions& opts = {}, int threads = 1);

double controlled_norm(const ControlledPath& y, const VolterraSignature& sig,
                       const NormParams& params, const TimeGrid& grid,
                       const ConvOptions& opts = {}, int threads = 1);

// Both sides of the Holder embedding on a shared grid, checked tuple by tuple:
// coarse-ratio <= T^{alpha-beta} * fine-ratio must hold at every probed tuple.
// Also audits the three-space chain with exponents (3rho+a*gamma, a*gamma),
// a = 1, 2, 3: per tuple, ratio_a <= 2^{3rho/a} * ratio_{a+1}.
struct EmbeddingAudit {
    double lhs = 0.0;
    double rhs = 0.0;
    double t_factor = 1.0;
    long long tuples_checked = 0;
    long long violations = 0;
    double worst_margin = 0.0;
    std::array<double, 3> chain_norms{};
    std::array<double, 2> chain_constants{};
    long long chain_checked = 0;
    long long chain_violations = 0;
    double chain_worst = 0.0;
};

EmbeddingAudit embedding_audit(const Delta2Fn& f, const NormParams& fine, const NormParams& coarse,
                               const TimeGrid& grid, int threads = 1);

}  // namespace volterra
