#pragma once

#include <stdexcept>
#include <string>

namespace mqe {

// Exit codes used by the command-line tool.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    data = 3,
    numerical = 4,
};

// Base of every error the library throws. `module()` names the component that
// raised it so the CLI can prefix its message.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what, ExitCode code)
        : std::runtime_error(what), module_(std::move(module)), code_(code) {}

    const std::string& module() const noexcept { return module_; }
    ExitCode exit_code() const noexcept { return code_; }

private:
    std::string module_;
    ExitCode code_;
};

// Malformed arguments or files: out-of-range indices, shape mismatches, bad lines.
class InputError : public Error {
public:
    InputError(std::string module, const std::string& what)
        : Error(std::move(module), what, ExitCode::data) {}
};

// Structurally valid input that an operation cannot handle (e.g. a zero-degree
// row when normalizing without self-loops).
class DegenerateInputError : public Error {
public:
    DegenerateInputError(std::string module, const std::string& what)
        : Error(std::move(module), what, ExitCode::data) {}
};

class ConfigError : public Error {
public:
    ConfigError(std::string module, const std::string& what)
        : Error(std::move(module), what, ExitCode::config) {}
};

class NumericalError : public Error {
public:
    NumericalError(std::string module, const std::string& what)
        : Error(std::move(module), what, ExitCode::numerical) {}
};

class EvaluationError : public Error {
public:
    EvaluationError(std::string module, const std::string& what)
        : Error(std::move(module), what, ExitCode::data) {}
};

}  // namespace mqe
