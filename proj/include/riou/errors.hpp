#pragma once

#include <stdexcept>
#include <string>

namespace riou {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A box whose corners are non-finite or out of order.
class InvalidBox : public Error {
public:
    using Error::Error;
};

/// IoU requested for two boxes whose union has zero area.
class UndefinedIoU : public Error {
public:
    using Error::Error;
};

/// Center-distance normalization on an enclosing box with zero diagonal.
class DegenerateEnclosure : public Error {
public:
    using Error::Error;
};

/// A scalar argument outside the domain of the function it was passed to.
class DomainError : public Error {
public:
    using Error::Error;
};

class BetaOutOfDomain : public DomainError {
public:
    using DomainError::DomainError;
};

class TargetUnreachable : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class NumericFailure : public Error {
public:
    using Error::Error;
};

}  // namespace riou
