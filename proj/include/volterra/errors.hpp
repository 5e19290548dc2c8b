#pragma once

#include <stdexcept>
#include <string>

namespace volterra {

// Numerical failures: the inputs were admissible but the computation could not
// produce a trustworthy result. The CLI maps these to exit code 3, while
// std::invalid_argument / std::logic_error (input validation) map to exit 2.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

class NonCauchy : public NumericalError {
public:
    explicit NonCauchy(const std::string& message) : NumericalError("non_cauchy", message) {}
};

class SingularBase : public NumericalError {
public:
    explicit SingularBase(const std::string& message) : NumericalError("singular_base", message) {}
};

class ExponentError : public NumericalError {
public:
    explicit ExponentError(const std::string& message) : NumericalError("exponent_error", message) {}
};

class DerivativeMismatch : public NumericalError {
public:
    explicit DerivativeMismatch(const std::string& message)
        : NumericalError("derivative_mismatch", message) {}
};

class NoConvergence : public NumericalError {
public:
    explicit NoConvergence(const std::string& message) : NumericalError("no_convergence", message) {}
};

class QuadratureNotConverged : public NumericalError {
public:
    explicit QuadratureNotConverged(const std::string& message)
        : NumericalError("quadrature_not_converged", message) {}
};

class StepUnderflow : public NumericalError {
public:
    explicit StepUnderflow(const std::string& message)
        : NumericalError("step_underflow", message) {}
};

// Validation error (exit 2): the starting controlled bundle handed to the
// fixed-point map does not match (y0, f(y0), f(y0) f'(y0), 0).
class InitialBundleMismatch : public std::invalid_argument {
public:
    explicit InitialBundleMismatch(const std::string& message) : std::invalid_argument(message) {}
};

}  // namespace volterra
