#pragma once

#include <stdexcept>
#include <string>

namespace soint {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed arguments: dimension mismatches, out-of-range indices, bad tags.
struct InvalidInputError : Error {
    using Error::Error;
};

// Configuration that cannot be executed (bad grid, unreadable files, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Requested enumeration exceeds the supported output-dimension bound.
struct CapacityError : Error {
    using Error::Error;
};

// Non-finite loss or gradient encountered while training.
struct TrainingDivergenceError : Error {
    TrainingDivergenceError(const std::string& msg, long iteration)
        : Error(msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration(iteration) {}
    long iteration;
};

}  // namespace soint
