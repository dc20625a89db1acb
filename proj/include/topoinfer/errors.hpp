#pragma once

#include <stdexcept>
#include <string>

namespace topoinfer {

// Bad user-supplied configuration (flags, config JSON, parameter ranges).
// CLI exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, logs, datasets).
// CLI exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace topoinfer
