#pragma once

#include <stdexcept>
#include <string>

namespace cnts {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration (bad dims, bad hyperparameters, bad experiment config).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data fails a contract (labels outside {0,1}, constant series, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Dimension / length mismatch between values that must agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN/Inf encountered, or a numeric precondition (eps > 0) violated.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed file content; message carries the line number where known.
class ParseError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure (open/read/write).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cnts
