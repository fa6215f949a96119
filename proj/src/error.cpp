#include "flm/error.hpp"

namespace flm {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
        case ErrorCode::CoefficientOverflow: return "CoefficientOverflow";
        case ErrorCode::CutoffTooSmall: return "CutoffTooSmall";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::MissingMoment: return "MissingMoment";
        case ErrorCode::InvalidChannel: return "InvalidChannel";
        case ErrorCode::DegenerateChannel: return "DegenerateChannel";
        case ErrorCode::PartitionMismatch: return "PartitionMismatch";
        case ErrorCode::ZeroMeanPhoton: return "ZeroMeanPhoton";
        case ErrorCode::ChannelNotSampleable: return "ChannelNotSampleable";
        case ErrorCode::InsufficientPhaseGrid: return "InsufficientPhaseGrid";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace flm
