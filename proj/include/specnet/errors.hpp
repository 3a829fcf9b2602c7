#pragma once

#include <stdexcept>
#include <string>

namespace specnet {

// Bad inputs: rejected configs, violated preconditions, coefficient data
// that fails its own invariants. CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Solvers that did not converge, non-finite values mid-computation.
// CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A checked mathematical invariant failed. CLI maps these to exit code 1.
struct InvariantViolation : std::runtime_error {
    explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace specnet
