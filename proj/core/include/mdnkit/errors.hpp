#pragma once

#include <stdexcept>
#include <string>

namespace mdnkit {

// Shape/dimension mismatches in tensor ops or model wiring.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values, failed numeric invariants, diverged training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format violations, truncated payloads, version mismatches.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid or unknown configuration keys/values.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mdnkit
