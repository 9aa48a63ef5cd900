#pragma once

#include <stdexcept>
#include <string>

namespace bdpo {

// File, schema, or token-level problems in external inputs.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values detected during loss/gradient evaluation.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bdpo
