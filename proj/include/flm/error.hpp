#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flm {

enum class ErrorCode {
    InvalidArgument,
    UnsupportedOrder,
    CoefficientOverflow,
    CutoffTooSmall,
    InvalidState,
    MissingMoment,
    InvalidChannel,
    DegenerateChannel,
    PartitionMismatch,
    ZeroMeanPhoton,
    ChannelNotSampleable,
    InsufficientPhaseGrid,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

inline void require(bool cond, ErrorCode code, const char* what) {
    if (!cond) fail(code, what);
}

}  // namespace flm
