#pragma once

#include <stdexcept>
#include <string>

namespace gazelab {

// Bad files, malformed manifests, impossible dataset requests. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Divergence, NaN losses, non-finite values where finiteness is required.
// CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape mismatches and misuse of the API map to std::invalid_argument
// (CLI exit code 2, same bucket as flag errors).

}  // namespace gazelab
