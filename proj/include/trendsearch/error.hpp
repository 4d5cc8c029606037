#pragma once

#include <stdexcept>
#include <string>

namespace trendsearch {

// Malformed or out-of-contract input (files, queries, arguments).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A persisted artifact was written by an incompatible version.
class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace trendsearch
