#pragma once

#include <stdexcept>
#include <string>

namespace robustgp {

/// Caller supplied malformed input (dimension mismatch, invalid range, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (factorization, non-definite Hessian, divergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factorization failed even after the maximum diagonal jitter.
class FactorizationError : public NumericalError {
public:
    FactorizationError(const std::string& what, double attempted_jitter)
        : NumericalError(what), attempted_jitter_(attempted_jitter) {}

    [[nodiscard]] double attempted_jitter() const noexcept { return attempted_jitter_; }

private:
    double attempted_jitter_;
};

/// Bad or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace robustgp
