#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stiffkit {

// Bad inputs, malformed files, violated preconditions. CLI exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failures during computation. CLI exit code 2.
struct NumericError : std::runtime_error {
    std::size_t index = 0;
    explicit NumericError(const std::string& msg, std::size_t where = 0)
        : std::runtime_error(msg), index(where) {}
};

// Integration blew up; `index` is the offending step.
struct DivergedError : NumericError {
    using NumericError::NumericError;
};

// Adaptive step size underflowed.
struct StalledError : NumericError {
    using NumericError::NumericError;
};

}  // namespace stiffkit
