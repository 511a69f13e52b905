#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace forge {

// Base of every error the library throws. `exit_code()` is what the CLI
// returns when the error escapes a stage.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

// Invariant or input-shape violation (bad rule pack, score out of range...).
class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Malformed record in a line-oriented file.
class ParseError : public ValidationError {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : ValidationError(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A statistic asked for on inputs where it is not defined (constant vector,
// no pairable values).
class UndefinedResultError : public Error {
public:
    using Error::Error;
};

// Stage invoked before its predecessors completed.
class OrderingError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

// LLM provider, analyzer or toolchain failure.
class ExternalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

class TransportError : public ExternalError {
public:
    using ExternalError::ExternalError;
};

}  // namespace forge
