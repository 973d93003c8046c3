#pragma once

#include <stdexcept>
#include <string>

namespace tphd {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Measurement geometry with no defined value or derivative (target at the
/// sensor, or on the vertical axis for the Jacobian).
class SingularGeometry : public Error {
public:
    using Error::Error;
};

class InvalidMerge : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tphd
