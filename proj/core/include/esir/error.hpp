#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esir {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or malformed argument (bad dimensions, L < 2, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Unreadable or malformed input file. Carries the byte offset at which
/// parsing failed, when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset = 0;
};

/// Filesystem-level failure (missing file, unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: singular linear system, non-finite loss or gradient.
/// `condition` holds the condition-number estimate of the offending system
/// when one is available.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, double condition_estimate = 0.0)
        : Error(what), condition(condition_estimate) {}
    double condition = 0.0;
};

}  // namespace esir
