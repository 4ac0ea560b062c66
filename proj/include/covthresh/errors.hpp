#pragma once

#include <stdexcept>
#include <string>

namespace covthresh {

/// Malformed input, violated precondition, or invalid configuration.
/// The CLI maps this family to exit code 2.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Text that does not parse as the expected file format.
class ParseError : public InputError {
public:
    using InputError::InputError;
};

/// A least-favorable configuration whose derived quantities break a
/// structural requirement (e.g. 2 k eps >= 1/3).
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

/// A parameter index or matrix that is not of the required structural form.
class StructureError : public InputError {
public:
    using InputError::InputError;
};

/// Mathematical domain violation: log of a nonpositive eigenvalue, a
/// covariance that is not PSD, an integral that does not exist.
/// The CLI maps this family to exit code 3.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NotPsdError : public DomainError {
public:
    NotPsdError(const std::string& what, double min_eigenvalue)
        : DomainError(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class DivergenceError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Eigensolver did not converge; carries ||A V - V diag(lambda)||_F.
class ConvergenceError : public DomainError {
public:
    ConvergenceError(const std::string& what, double residual)
        : DomainError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// An enumeration or exact computation would exceed its budget.
/// `count` is the exact decimal count of the work items (or a lower bound,
/// flagged by `exact() == false`, when even counting is infeasible).
/// The CLI maps this to exit code 4.
class BudgetError : public std::length_error {
public:
    BudgetError(const std::string& what, std::string count, bool exact = true)
        : std::length_error(what), count_(std::move(count)), exact_(exact) {}
    const std::string& count() const noexcept { return count_; }
    bool exact() const noexcept { return exact_; }

private:
    std::string count_;
    bool exact_;
};

}  // namespace covthresh
