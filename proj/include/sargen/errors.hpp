#pragma once

#include <stdexcept>
#include <string>

namespace sargen {

/// Bad arguments or malformed data handed to an operation.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration (rejected before any work starts).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation invoked in a state that cannot serve it (missing prerequisite,
/// wrong phase, incomplete grid).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / serialization failure; message names the offending record.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sargen
