#pragma once

#include <stdexcept>
#include <string>

namespace hyperalign {

enum class ErrorKind { InvalidInput, NumericalError, SchemaError, IoError, ConfigError };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::NumericalError, what) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(ErrorKind::SchemaError, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::IoError, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::ConfigError, what) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace hyperalign
