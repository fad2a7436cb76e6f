#pragma once

#include <stdexcept>
#include <string>

namespace mhdlayer {

// Invalid user-facing configuration (bad dimensions, schema violations).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A documented precondition of an operation does not hold.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CflError : std::runtime_error {
    CflError(double max_speed, double dt, double limit)
        : std::runtime_error("CFL violation: max speed " + std::to_string(max_speed) +
                             " with dt " + std::to_string(dt) + " exceeds limit " +
                             std::to_string(limit)),
          max_speed(max_speed) {}
    double max_speed;
};

struct InstabilityError : std::runtime_error {
    InstabilityError(long step, const std::string& what)
        : std::runtime_error("instability at step " + std::to_string(step) + ": " + what),
          step(step) {}
    long step;
};

}  // namespace mhdlayer
