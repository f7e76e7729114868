#include "touchlab/common.hpp"

namespace touchlab {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InsufficientFrames: return "InsufficientFrames";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::AllPixelsInvalid: return "AllPixelsInvalid";
        case ErrorCode::PoseOutOfBounds: return "PoseOutOfBounds";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::GeometryOutOfFrame: return "GeometryOutOfFrame";
        case ErrorCode::EmptyRegion: return "EmptyRegion";
        case ErrorCode::EmptyHeatmap: return "EmptyHeatmap";
        case ErrorCode::MissingJoints: return "MissingJoints";
        case ErrorCode::MissingHeatmapFile: return "MissingHeatmapFile";
        case ErrorCode::NonFiniteCost: return "NonFiniteCost";
        case ErrorCode::SeedMismatch: return "SeedMismatch";
        case ErrorCode::EmptyReference: return "EmptyReference";
        case ErrorCode::ZeroDuration: return "ZeroDuration";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::string_view to_string(Finger f) {
    switch (f) {
        case Finger::Thumb: return "thumb";
        case Finger::Index: return "index";
        case Finger::Middle: return "middle";
        case Finger::Ring: return "ring";
        case Finger::Little: return "little";
        case Finger::Unknown: return "unknown";
    }
    return "unknown";
}

Finger finger_from_string(std::string_view s) {
    for (int f = 0; f <= static_cast<int>(Finger::Unknown); ++f) {
        if (to_string(static_cast<Finger>(f)) == s) return static_cast<Finger>(f);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown finger '" + std::string(s) + "'");
}

std::string_view to_string(HandSide s) { return s == HandSide::Right ? "right" : "left"; }

HandSide hand_side_from_string(std::string_view s) {
    if (s == "right") return HandSide::Right;
    if (s == "left") return HandSide::Left;
    throw Error(ErrorCode::InvalidArgument, "unknown hand side '" + std::string(s) + "'");
}

}  // namespace touchlab
