#pragma once

#include <stdexcept>
#include <string>

namespace dmgmap {

// Exit codes used by the command-line front end. Each exception family below
// maps onto exactly one of them.
enum class ExitCode : int {
    Success = 0,
    ConfigError = 2,
    DataError = 3,
    NumericFailure = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::DataError; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::ConfigError; }
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::NumericFailure; }
};

// Artifact container failures.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

class TruncatedError : public DataError {
public:
    using DataError::DataError;
};

class ChecksumError : public DataError {
public:
    using DataError::DataError;
};

class SchemaVersionError : public DataError {
public:
    using DataError::DataError;
};

} // namespace dmgmap
