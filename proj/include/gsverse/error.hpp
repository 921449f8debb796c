#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsverse {

enum class ErrorCode {
  MalformedPly,
  UnsupportedFormat,
  MalformedObj,
  IndexOutOfRange,
  EmptyRegionList,
  BadMagic,
  VersionMismatch,
  SectionTruncated,
  DegenerateFace,
  EmptyCloud,
  DegenerateMesh,
  NonFiniteState,
  InvalidFace,
  DimensionMismatch,
  UnknownObject,
  UnknownMessageType,
  Truncated,
  MalformedMessage,
  NoFramesYet,
  BindFailure,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported through this type; the
// code is what callers branch on, the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace gsverse
