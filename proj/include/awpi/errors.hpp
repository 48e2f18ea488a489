#pragma once

#include <stdexcept>
#include <string>

namespace awpi {

/// Vector lengths that should agree do not.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a map (e.g. a valve vector outside S).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Iterative solver (Newton, fixed point) failed to converge.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// ODE integration failed, e.g. step size underflow.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double time)
        : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Controller gains violate a tuning rule a computation depends on.
class TuningError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace awpi
