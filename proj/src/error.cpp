#include "gsverse/error.hpp"

namespace gsverse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedPly: return "MalformedPly";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::MalformedObj: return "MalformedObj";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyRegionList: return "EmptyRegionList";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SectionTruncated: return "SectionTruncated";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::DegenerateMesh: return "DegenerateMesh";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::InvalidFace: return "InvalidFace";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::UnknownMessageType: return "UnknownMessageType";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::NoFramesYet: return "NoFramesYet";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace gsverse
