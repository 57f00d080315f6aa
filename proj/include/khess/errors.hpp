#pragma once

#include <stdexcept>
#include <string>

namespace khess {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (k out of range,
/// negative sigma_k under a root, theta <= 0, mismatched masks, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed user input: expression syntax, config files, missing fields.
class InputError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

/// The starting iterate is not strictly k-admissible.
class InitializationError : public Error {
public:
    using Error::Error;
};

}  // namespace khess
