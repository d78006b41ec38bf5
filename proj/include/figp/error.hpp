#ifndef FIGP_ERROR_HPP
#define FIGP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace figp {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, missing files, or inconsistent settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or non-finite input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch between profiles, grids, or parameter vectors.
class ShapeError : public DataError {
public:
    using DataError::DataError;
};

/// Factorization failure or other loss of numerical integrity.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, double jitter = 0.0)
        : Error(what), jitter_(jitter) {}

    /// Largest diagonal jitter attempted before giving up (0 when not applicable).
    double jitter() const noexcept { return jitter_; }

private:
    double jitter_;
};

} // namespace figp

#endif
