#pragma once

#include <stdexcept>
#include <string>

namespace actsc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON, truncated binary, unknown magic).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Data parsed but violates an invariant (dimension mismatch, bad label, NaN).
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// An answer source could not serve a draw (unknown problem, exhausted pool,
/// transport failure after retries).
class SamplerError : public Error {
public:
    using Error::Error;
};

} // namespace actsc
