#pragma once

#include <stdexcept>
#include <string>

namespace wavelit {

// Shape/extent violations (mismatched operands, indivisible grids).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration values (unknown names, missing fields, invalid knobs).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SPD factorization failure; message names the failing diagonal index.
struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (e.g. backward on a non-scalar).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at runtime (non-finite loss/gradient, oracle blow-up).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace wavelit
