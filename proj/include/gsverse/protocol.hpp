#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gsverse/bundle.hpp"
#include "gsverse/bytes.hpp"
#include "gsverse/meshparam.hpp"

// Binary engine<->viewer protocol. Every frame is
//   "GSVW" | u16 version | u8 msg_type | payload
// with all integers little-endian and all reals IEEE float32 (sim_time f64).
namespace gsverse::protocol {

inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 7;

enum class MessageType : std::uint8_t {
  Init = 1,
  VerticesFrame = 2,
  GrabInput = 3,
  MoveTarget = 4,
  Release = 5,
  GrabAck = 6,
  MacroInput = 7,
  Stats = 8,
  Error = 9,
};

struct InitObject {
  std::string name;
  std::vector<Eigen::Vector3f> rest_vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<AnchoredGaussian> anchors;
  AppearanceTable appearance;
  bool operator==(const InitObject&) const = default;
};

// epsilon_flat and rho_max follow the object list once, for all objects.
struct Init {
  std::vector<InitObject> objects;
  float epsilon_flat = static_cast<float>(kEpsilonFlat);
  float rho_max = static_cast<float>(kRhoMax);
  bool operator==(const Init&) const = default;
};

struct VerticesFrame {
  std::uint64_t frame_index = 0;
  double sim_time = 0.0;
  std::uint32_t object_id = 0;
  std::vector<Eigen::Vector3f> positions;
  bool operator==(const VerticesFrame&) const = default;
};

struct GrabInput {
  std::uint32_t object_id = 0;
  std::uint32_t face_id = 0;
  std::array<float, 3> bary{};
  std::array<float, 3> target{};
  float stiffness = 1.0f;
  bool operator==(const GrabInput&) const = default;
};

struct MoveTarget {
  std::uint32_t grab_id = 0;
  std::array<float, 3> target{};
  bool operator==(const MoveTarget&) const = default;
};

struct Release {
  std::uint32_t grab_id = 0;
  bool operator==(const Release&) const = default;
};

struct GrabAck {
  std::uint32_t grab_id = 0;
  bool operator==(const GrabAck&) const = default;
};

struct MacroInput {
  std::uint8_t kind = 0;
  std::uint32_t object_id = 0;
  std::array<float, 4> params{};
  bool operator==(const MacroInput&) const = default;
};

struct Stats {
  float mean_ms = 0, p50_ms = 0, p99_ms = 0, splats_per_s = 0;
  bool operator==(const Stats&) const = default;
};

enum class ErrorKind : std::uint32_t {
  Malformed = 1,
  NotController = 2,
  UnknownObject = 3,
  InvalidFace = 4,
  UnknownGrab = 5,
  Rejected = 6,
};

struct ErrorFrame {
  std::uint32_t code = 0;
  std::string detail;
  bool operator==(const ErrorFrame&) const = default;
};

using Message =
    std::variant<Init, VerticesFrame, GrabInput, MoveTarget, Release, GrabAck, MacroInput, Stats, ErrorFrame>;

MessageType type_of(const Message& msg);
Bytes encode(const Message& msg);
// Throws BadMagic, VersionMismatch, UnknownMessageType, Truncated, or
// MalformedMessage (trailing bytes, bad SH degree).
Message decode(ByteView bytes);

Init make_init(const SceneBundle& bundle);

}  // namespace gsverse::protocol
