#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rawmix {

enum class ErrorKind {
    coordinate,
    structure,
    range,
    alignment,
    config,
    size,
    data,
    contract,
    io,
    usage,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the toolkit; `kind()` lets callers (the CLI in
/// particular) map failures to exit codes without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace rawmix
