#pragma once

#include <stdexcept>
#include <string>

namespace forkpath {

/// Base of every error the engine raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed study config or invalid option references.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Unreadable data files, missing columns, bad dates.
class DataError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class SingularDesignError : public Error {
public:
    using Error::Error;
};

/// A conditional split could not find the distance-1 twin of a path.
class PairingError : public Error {
public:
    using Error::Error;
};

}  // namespace forkpath
