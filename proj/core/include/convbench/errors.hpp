#pragma once

#include <stdexcept>
#include <string>

namespace convbench {

/// Shape or extent mismatch between operands.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite value where finite data is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value. Carries the offending field name so the
/// CLI can report it on stderr.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& msg)
        : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// API misuse: wrong tape, non-scalar loss, empty sequence, ...
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Advective CFL precondition violated.
class StabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pressure projection failed to reach its divergence tolerance.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File or stream failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(int epoch, const std::string& msg)
        : std::runtime_error(msg + " (epoch " + std::to_string(epoch) + ")"),
          epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

/// Autoregressive rollout produced a non-finite field.
class RolloutDivergedError : public std::runtime_error {
public:
    RolloutDivergedError(int step, const std::string& msg)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"),
          step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

} // namespace convbench
