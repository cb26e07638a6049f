#pragma once

#include <stdexcept>
#include <string>

namespace m2dl {

enum class Errc {
    DimensionMismatch,
    InvalidArgument,
    NotConverged,
    NotPositiveDefinite,
    NonFinite,
    UnknownTask,
    Io,
    Parse,
};

const char* to_string(Errc code) noexcept;

// Every failure in the library surfaces as this exception. `code` is the
// machine-readable part; the message carries the context (shapes, iteration,
// offending line, ...).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace m2dl
