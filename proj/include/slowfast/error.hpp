#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace slowfast {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A scalar argument lies outside the domain of the operation (e.g. tau outside [0,1]).
class DomainError : public Error {
public:
    using Error::Error;
};

// Caller broke a precondition that is not a shape or domain issue.
class ContractError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: empty phases, oversized allocations, unknown config keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Missing or unknown class id for a conditional model.
class ConditionError : public Error {
public:
    using Error::Error;
};

// Adapter does not fit the model it is applied to.
class AdapterError : public Error {
public:
    using Error::Error;
};

class VelocityField;

// NaN/Inf encountered during training or sampling. Carries the step index and,
// when available, a copy of the parameters at the time of the failure.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, long step,
                   std::shared_ptr<const VelocityField> snapshot = nullptr)
        : Error(what), step_(step), snapshot_(std::move(snapshot)) {}

    long step() const noexcept { return step_; }
    const std::shared_ptr<const VelocityField>& snapshot() const noexcept { return snapshot_; }

private:
    long step_;
    std::shared_ptr<const VelocityField> snapshot_;
};

enum class LoadErrorKind { io, bad_magic, version, truncated, schema, shape };

class LoadError : public Error {
public:
    LoadError(LoadErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    LoadErrorKind kind() const noexcept { return kind_; }

private:
    LoadErrorKind kind_;
};

} // namespace slowfast
