#pragma once

#include <stdexcept>
#include <string>

namespace spotmatch {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid argument or violated type invariant.
class DomainError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong behavioral regime (AGD vs AGN).
class RegimeError : public DomainError {
public:
    using DomainError::DomainError;
};

// Stochastic-sim exact-rounding mode hit a fractional adopted count.
class IntegralityError : public DomainError {
public:
    using DomainError::DomainError;
};

// Well-posed inputs, but a numerical procedure could not deliver.
class NumericalError : public Error {
public:
    using Error::Error;
};

class BracketError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class BudgetError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

namespace detail {

[[noreturn]] inline void domain_fail(const std::string& what) { throw DomainError(what); }

inline void require(bool ok, const char* what) {
    if (!ok) domain_fail(what);
}

}  // namespace detail
}  // namespace spotmatch
