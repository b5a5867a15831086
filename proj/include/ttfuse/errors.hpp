#pragma once

#include <stdexcept>
#include <string>

namespace ttfuse {

// Malformed container, manifest or checkpoint bytes.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A request that would materialize more memory than a guard allows.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

// Non-finite loss or gradient during training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ttfuse
