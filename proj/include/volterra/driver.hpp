#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "volterra/grid.hpp"
#include "volterra/tensor.hpp"

namespace volterra {

// A driving signal x : [0,T] -> R^d. Two storage kinds: piecewise-linear through
// stored samples (also the form produced by CSV ingestion and the fBm sampler),
// and analytic with user-supplied value and derivative closures. Immutable after
// construction; all accessors are safe to call concurrently.
class DrivingPath {
public:
    enum class Kind { PiecewiseLinear, Analytic };

    using VectorFn = std::function<void(double t, double* out)>;

    struct TrigComponent {
        std::string shape;  // "sin" | "cos" | "linear"
        double amplitude = 1.0;
        double frequency = 1.0;
        double phase = 0.0;
    };

    // values is row-major, (n_samples x d)
    static DrivingPath piecewise_linear(std::vector<double> times, std::vector<double> values,
                                        int dim, double alpha_hint);
    // The derivative closure is probed against central differences of the value
    // closure at construction; a mismatch throws DerivativeMismatch.
    static DrivingPath analytic(int dim, VectorFn value_fn, VectorFn derivative_fn, double horizon,
                                double alpha_hint);
    static DrivingPath trig(const std::vector<TrigComponent>& components, double horizon,
                            double alpha_hint);
    // CSV with a required header row; columns: time, then d value columns.
    static DrivingPath from_csv(const std::string& path, double alpha_hint);

    int dim() const { return dim_; }
    Kind kind() const { return kind_; }
    double horizon() const { return horizon_; }
    double alpha_hint() const { return alpha_hint_; }

    // Allocation-free evaluation into caller buffers of length dim().
    void value_into(double t, double* out) const;
    void derivative_into(double t, double* out) const;  // right-slope inside PL segments

    Tensor value(double t) const;
    Tensor derivative(double t) const;
    Tensor increment(double s, double t) const;  // x_t - x_s

    // Piecewise-linear structure (throws std::logic_error for analytic paths).
    const std::vector<double>& times() const;
    int segment_count() const;
    int segment_of(double t) const;          // index i with times[i] <= t <= times[i+1]
    double segment_slope(int seg, int comp) const;

    // max over grid pairs s < t of |x_t - x_s|_2 / (t-s)^alpha; a lower bound for
    // the Holder seminorm that never decreases under grid refinement.
    double holder_norm(double alpha, const TimeGrid& grid) const;

private:
    DrivingPath() = default;

    Kind kind_ = Kind::PiecewiseLinear;
    int dim_ = 0;
    double horizon_ = 0.0;
    double alpha_hint_ = 1.0;

    // piecewise-linear storage
    std::vector<double> times_;
    std::vector<double> values_;  // (n x d) row-major
    std::vector<double> slopes_;  // ((n-1) x d) row-major

    // analytic storage
    VectorFn value_fn_;
    VectorFn derivative_fn_;

    void check_time(double t) const;
};

// Exact-covariance fractional Brownian motion on the uniform grid {iT/n}, scalar-valued,
// piecewise-linear between samples. Deterministic per seed.
DrivingPath sample_fbm(double hurst, int n, std::uint64_t seed, double horizon);

}  // namespace volterra
