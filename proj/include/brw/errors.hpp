#pragma once

#include <stdexcept>
#include <string>

namespace brw {

// Malformed or inconsistent experiment configuration. CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A computation would exceed the configured memory budget. CLI exit code 3.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace brw
