#pragma once

#include <stdexcept>

namespace dfsw {

// Caller-supplied model or code parameters outside their valid range.
struct InvalidParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Stationary-distribution computation did not converge (reducible or
// periodic chain without a usable fixed point).
struct SingularChainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exact enumeration requested beyond the feasible conditioning depth;
// use the Monte Carlo estimator instead.
struct InfeasibleDepthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Code construction could not satisfy the degree / girth constraints.
struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched vector or matrix dimensions.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed serialized input (alist file, model config, compressed stream).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace dfsw
