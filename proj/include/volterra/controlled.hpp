#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "volterra/quadrature.hpp"
#include "volterra/signature.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// Controlled Volterra path: a value slice y^tau_t plus the three derivative
// slots that drive its expansion along the signature. All four components are
// closures (no Delta_4 tables are ever materialized) and must be pure.
//
// Upper-argument conventions: dot carries (tau, p), cherry and pair carry
// (tau, q, p); tensor slots pair q with the outer and p with the inner
// integration variable of the matching block. Paths with in_d_hat set ignore
// tau in dot and cherry and have pair identically zero.
class ControlledPath {
public:
    using PathFn = std::function<Tensor(double t, double tau)>;
    using DotFn = std::function<Tensor(double t, double tau, double p)>;
    using SlotFn = std::function<Tensor(double t, double tau, double q, double p)>;

    ControlledPath() = default;
    ControlledPath(std::vector<int> value_shape, int driver_dim, PathFn y, DotFn y_dot,
                   SlotFn y_cherry, SlotFn y_pair, bool in_d_hat);

    // y ident. equal to c, all derivative slots zero.
    static ControlledPath constant(Tensor c, int driver_dim);
    // y = z^{dot}_{t0}, y_dot the identity map, higher slots zero.
    static ControlledPath canonical_lift(const VolterraSignature& sig);

    const std::vector<int>& value_shape() const { return value_shape_; }
    std::vector<int> dot_shape() const;   // value_shape + [d]
    std::vector<int> slot_shape() const;  // value_shape + [d, d]
    int driver_dim() const { return d_; }
    bool in_d_hat() const { return in_d_hat_; }

    Tensor value(double t, double tau) const { return y_(t, tau); }
    Tensor dot(double t, double tau, double p) const { return y_dot_(t, tau, p); }
    Tensor cherry(double t, double tau, double q, double p) const {
        return y_cherry_(t, tau, q, p);
    }
    Tensor pair(double t, double tau, double q, double p) const { return y_pair_(t, tau, q, p); }

    Tensor initial_value() const { return y_(0.0, 0.0); }
    Tensor initial_dot() const { return y_dot_(0.0, 0.0, 0.0); }
    Tensor initial_cherry() const { return y_cherry_(0.0, 0.0, 0.0, 0.0); }
    Tensor initial_pair() const { return y_pair_(0.0, 0.0, 0.0, 0.0); }

private:
    std::vector<int> value_shape_;
    int d_ = 0;
    PathFn y_;
    DotFn y_dot_;
    SlotFn y_cherry_;
    SlotFn y_pair_;
    bool in_d_hat_ = false;
};

// f: R^m -> L(R^d, R^m) with four explicit derivative levels. Derivatives are
// supplied as multilinear maps (no automatic differentiation): d1 has shape
// [m,d,m], each further level appends one m-index. Instances are immutable and
// cheap to copy.
class SmoothFunction {
public:
    using MapFn = std::function<Tensor(const Tensor& y)>;

    static SmoothFunction constant(int m, int d, Tensor value);
    // f(y) = slope . y + offset with slope [m,d,m], offset [m,d].
    static SmoothFunction linear(int m, int d, Tensor slope, Tensor offset);
    // f(y)[i][a] = amplitude sin(frequency y_i + a pi / (2 d)); C^inf bounded.
    static SmoothFunction sine(int m, int d, double amplitude = 1.0, double frequency = 1.0);
    // f(y)[i][a] = scale / (1 + exp(-(rate y_i + a))); C^inf bounded.
    static SmoothFunction scaled_logistic(int m, int d, double scale = 1.0, double rate = 1.0);
    static SmoothFunction custom(int m, int d, std::string name, MapFn f, MapFn f1, MapFn f2,
                                 MapFn f3, MapFn f4, double bound);

    int m() const;
    int d() const;
    const std::string& name() const;
    double bound() const;

    Tensor eval(const Tensor& y) const;  // [m,d]
    Tensor d1(const Tensor& y) const;    // [m,d,m]
    Tensor d2(const Tensor& y) const;    // [m,d,m,m]
    Tensor d3(const Tensor& y) const;    // [m,d,m,m,m]
    Tensor d4(const Tensor& y) const;    // [m,d,m,m,m,m]

    // Audits every supplied level against central differences of the previous
    // one on a seeded probe set (1e-5 relative); throws DerivativeMismatch.
    // Runs at most once per instance; later calls return immediately.
    void probe_derivatives(std::uint64_t seed = 7) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

// How a convolution combines the signature block with the integrand value:
// TensorProduct forms block (x) value; ApplyMap contracts the block against the
// trailing indices of the value (the value acts as a multilinear map).
enum class ConvMode { TensorProduct, ApplyMap };

struct SewingDiagnostics;

struct ConvOptions {
    ConvMode mode = ConvMode::ApplyMap;
    double tol = 0.0;    // sewing tolerance; 0 = auto, < 0 = diagnostics mode
    int max_level = 12;
    int threads = 1;
    DeOptions quad;      // in-cell correction quadrature
    SewingDiagnostics* diagnostics = nullptr;  // filled when non-null
};

using Upper1Fn = std::function<Tensor(double r)>;
using Upper2Fn = std::function<Tensor(double r1, double r2)>;
using Upper3Fn = std::function<Tensor(double r1, double r2, double r3)>;

// First-order convolution over [u, t] with kernel upper argument tau:
// the limit of sum z^{dot,tau}_{v'u'} . y_upper(u') over refining partitions.
// The partition skeleton is anchored at s (s <= u), so with s == u and constant
// y_upper every level reproduces level1(u, t, tau) . c bit for bit.
Tensor conv1(const VolterraSignature& sig, double s, double u, double t, double tau,
             const Upper1Fn& y_upper, const ConvOptions& opts = {});

// Second-order convolution over the simplex s < r2 < r1 < t: integrand
// y12(r1, r2) against k(tau, r1) dx_{r1} k(r1, r2) dx_{r2}.
Tensor conv2(const VolterraSignature& sig, double s, double t, double tau, const Upper2Fn& y12,
             const ConvOptions& opts = {});

// Third-order convolution for sigma in {Chain3, Vee}. Chain3 integrates
// y123(r1, r2, r3) over s < r3 < r2 < r1 < t against the nested kernel chain;
// Vee pairs r1 with two independent inner variables l1, l2 in (s, r1)^2.
Tensor conv3(const VolterraSignature& sig, TreeSymbol sigma, double s, double t, double tau,
             const Upper3Fn& y123, const ConvOptions& opts = {});

// Convolution against the tensor square block: y12(r1, r2) integrated over the
// full square (s, t)^2 with both factors carrying k(tau, .).
Tensor conv_pair(const VolterraSignature& sig, double s, double t, double tau, const Upper2Fn& y12,
                 const ConvOptions& opts = {});

// Three-upper-argument lift ignoring its first upper argument.
using Eval2Fn = std::function<Tensor(double t, double p, double q)>;
using Eval3Fn = std::function<Tensor(double t, double p, double q, double r)>;
Eval3Fn lift_upper(Eval2Fn y12);

// Composition with a smooth function on D-hat bundles with values in R^m.
// The result has values in L(R^d, R^m) and genuinely depends on its upper
// arguments (in_d_hat false).
ControlledPath compose(const SmoothFunction& f, const ControlledPath& y);

// Defining remainders, computed by subtracting the convolution expansion from
// the raw increment. remainder_y needs all three slots; remainder_dot uses the
// dot relation with frozen (tau, p).
Tensor remainder_y(const VolterraSignature& sig, const ControlledPath& y, double s, double t,
                   double tau, const ConvOptions& opts = {});
Tensor remainder_dot(const VolterraSignature& sig, const ControlledPath& y, double s, double t,
                     double tau, double p, const ConvOptions& opts = {});

// Coordinate forms of the second-derivative exchange: both orderings of
// contracting f2 against (ydot . z1) and ydot, returned as their max-norm
// difference. Zero by symmetry of mixed second derivatives.
double cancellation_residual(const Tensor& f2, const Tensor& ydot, const Tensor& z1);
double cancellation_check(const VolterraSignature& sig, const ControlledPath& y,
                          const SmoothFunction& f, double s, double t, double tau);

}  // namespace volterra
