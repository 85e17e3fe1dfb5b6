// errors.hpp — Error categories mapped to the CLI exit codes

#pragma once

#include <stdexcept>
#include <string>

namespace vapormem {

// Bad scenario/calibration input: unknown keys, parse failures, range checks.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical/physical failures: stability guards, invariant violations,
// degenerate denominators, grid coverage.
struct physics_error : std::runtime_error {
    explicit physics_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures, always carrying the offending path.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace vapormem
