#pragma once

#include <stdexcept>
#include <string>

namespace wordorder {

/// Malformed or inconsistent input data (bad files, shape mismatches,
/// insufficient sentences). The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration. The CLI maps it to exit code 1.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace wordorder
