#pragma once

#include <stdexcept>
#include <string>

namespace lexirobust {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: wrong dimensions, non-stochastic rows, bad parameters.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A solver produced a result whose residual exceeds the accepted bound.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The policy-induced chain is reducible or periodic, so no unique positive
/// stationary distribution exists.
class ErgodicityError : public Error {
public:
    ErgodicityError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Inconsistent training or campaign configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace lexirobust
