#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "volterra/driver.hpp"
#include "volterra/kernel.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// Rooted trees with at most three vertices indexing the signature blocks.
// Chain2 is the 2-chain (one vertex grafted on the root), Chain3 the 3-chain,
// Vee the root with two leaves, Pair the formal tensor square of Dot.
enum class TreeSymbol { Dot, Chain2, Chain3, Vee, Pair };

// Number of vertices |sigma|: 1, 2, 3, 3, 2.
int tree_vertices(TreeSymbol sigma);
// Tensor rank of the block; equals tree_vertices for every symbol.
int tree_rank(TreeSymbol sigma);
// Canonical names: dot, cherry, chain3, vee, pair.
std::string tree_name(TreeSymbol sigma);
// Parses canonical names plus aliases (chain2 -> cherry, dot1 etc.); throws
// std::invalid_argument for unknown names.
TreeSymbol tree_symbol_from(std::string_view name);
const std::array<TreeSymbol, 5>& all_tree_symbols();

// Nested-refinement controls for the quadrature backing every block. tol is
// relative to max(1, |I|); stall_tol is the acceptance threshold past the last
// refinement level before QuadratureNotConverged is raised.
struct QuadratureSpec {
    int min_level = 2;
    int max_level = 7;
    double tol = 1e-10;
    double stall_tol = 1e-6;
};

// Tree-indexed signature blocks z^{sigma,tau}_{ts} above a kernel and a
// bounded-variation driver. Evaluations are memoized; copies share the cache.
//
// Index order of the returned tensors: index 1 belongs to the outermost
// integration variable r1 (the factor dx_{r1} carrying k(tau, r1)), then
// inward.
class VolterraSignature {
public:
    VolterraSignature(Kernel kernel, DrivingPath path, QuadratureSpec quad = {});

    const Kernel& kernel() const;
    const DrivingPath& path() const;
    const QuadratureSpec& quad() const;
    int dim() const;

    // z^{sigma,tau}_{ts}, shape d^rank(sigma). Requires s <= t <= tau.
    Tensor level(TreeSymbol sigma, double s, double t, double tau) const;
    // z^{dot,tau}_{ts} = int_s^t k(tau, r) dx_r.
    Tensor level1(double s, double t, double tau) const;

    // Max-norm of delta_u z^{sigma,tau}_{ts} minus the algebraic right side,
    // for sigma in {Chain2, Chain3, Vee}; the right side is evaluated through
    // the conv operators of the controlled layer. Requires s < u < t <= tau.
    double chen_residual(TreeSymbol sigma, double s, double u, double t, double tau) const;

    std::size_t cache_size() const;
    void clear_cache() const;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

}  // namespace volterra
