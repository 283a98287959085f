#pragma once

#include <stdexcept>
#include <string>

namespace entroflow {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration (unknown names, out-of-range parameters, bad keys).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Floating-point failure: overflow, instability, loss of positivity.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A Monte Carlo run produced a non-finite state or weight.
class SimulationError : public Error {
public:
    using Error::Error;
};

/// Two objects that must share a grid do not.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Requested time (or range of times) is not covered by a stored field.
class RangeError : public Error {
public:
    using Error::Error;
};

}  // namespace entroflow
