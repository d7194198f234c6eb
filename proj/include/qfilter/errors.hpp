#pragma once

#include <stdexcept>
#include <string>

namespace qfilter {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad files, bad parameter domains (exit code 1 in the CLI).
struct InputError : Error {
    using Error::Error;
};

/// Shape, grid-alignment, or structural-constraint problems (exit code 2).
struct DimensionError : Error {
    using Error::Error;
};

/// Numerical failure: indefinite solves, factorization failures (exit code 3).
struct NumericError : Error {
    using Error::Error;
};

/// Posterior covariance dropped below the allowed negativity window during
/// integration. Carries the time stamp of the offending step.
struct PositivityLossError : NumericError {
    PositivityLossError(const std::string& msg, double t)
        : NumericError(msg), time(t) {}
    double time;
};

} // namespace qfilter
