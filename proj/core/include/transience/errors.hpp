#pragma once

#include <stdexcept>
#include <string>

namespace transience {

/// Numerical failures (divergence, indefinite matrices, tolerance breaches).
/// The CLI maps these to exit code 2; std::invalid_argument maps to exit code 1.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPsdError : NumericalError {
    using NumericalError::NumericalError;
};

/// Thrown when a batch is too small for a loss to be well defined
/// (e.g. batch covariance of N samples in d dimensions with N <= d).
struct IllConditionedBatchError : NumericalError {
    using NumericalError::NumericalError;
};

/// Training objective became nonfinite. Carries the outer iteration index.
struct DivergenceError : NumericalError {
    DivergenceError(const std::string& what, int outer_iteration)
        : NumericalError(what), outer_iter(outer_iteration) {}
    int outer_iter;
};

}  // namespace transience
