#pragma once

#include <stdexcept>
#include <string>

namespace sage {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension or shape mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (sketch size, fraction, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad data content: non-finite values, missing labels.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed persisted file (magic, version, size).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure (open, read, write).
class IoError : public Error {
public:
    using Error::Error;
};

/// Object used in a state that forbids the operation.
class StateError : public Error {
public:
    using Error::Error;
};

/// Iterative numerics failed to converge within its sweep cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, double residual)
        : Error(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

/// Requested budget is infeasible (empty subset, k over total).
class BudgetError : public Error {
public:
    using Error::Error;
};

/// Streaming source misbehaved across passes (count drift).
class StreamError : public Error {
public:
    using Error::Error;
};

/// Problem too large for the brute-force oracle path.
class ScaleGuardError : public Error {
public:
    using Error::Error;
};

}  // namespace sage
