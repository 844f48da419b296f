#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hconv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments, inconsistent dimensions, or a request the engines cannot honor.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A fast engine was asked to run a shape it does not support (stride > 1, wrong kernel size).
class UnsupportedAlgorithm : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Descriptor or plan text that does not parse.
class SyntaxError : public ValidationError {
public:
    SyntaxError(int line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorKind { bad_magic, truncated, dimension_overflow, bad_header };

/// Malformed binary tensor data.
class FormatError : public IoError {
public:
    FormatError(FormatErrorKind kind, const std::string& what) : IoError(what), kind_(kind) {}

    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

}  // namespace hconv
