#pragma once

#include <stdexcept>
#include <string>

namespace raindiff {

// Dimension/axis mismatches (conv shapes, resize targets, metric pairs).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid knobs: bad group counts, unknown config keys, degenerate splits.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File format and I/O failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where the numeric contract forbids them.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace raindiff
