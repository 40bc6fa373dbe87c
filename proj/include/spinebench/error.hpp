#pragma once

#include <stdexcept>
#include <string>

namespace spinebench {

enum class ErrorCode {
    invalid_argument = 1,
    io,
    format,
    invalid_label,
    grid_mismatch,
    empty_input,
    no_decision,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace spinebench
