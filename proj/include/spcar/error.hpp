#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spcar {

enum class ErrorKind {
    Parse,
    Validation,
    Join,
    Contract,
    Numerical,
    Config,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is kept
/// so that the CLI can emit a machine-readable error record.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, long line)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class JoinError : public Error {
public:
    explicit JoinError(const std::string& what) : Error(ErrorKind::Join, what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorKind::Contract, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace spcar
