#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace vulnscore {

/// Base class for every error raised by the library. Callers that only need a
/// message can catch this; the CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed textual input (DOT, JSON, vector strings, CSV).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    /// 1-based line of the offending token, 0 when not applicable.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Input is well-formed but uses a construct we deliberately do not accept.
class UnsupportedFormatError : public Error {
public:
    using Error::Error;
};

/// Schema violation. The message names the offending JSON path.
class ValidationError : public Error {
public:
    ValidationError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Cross-reference failure between otherwise valid parts of a document.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Operation called outside its domain (empty dataset, nv = 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

}  // namespace vulnscore
