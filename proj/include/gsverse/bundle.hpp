#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsverse/assets.hpp"
#include "gsverse/bytes.hpp"
#include "gsverse/meshparam.hpp"

namespace gsverse {

enum class BodyKind { Soft, Rigid, Static };

struct ObjectSettings {
  BodyKind body = BodyKind::Soft;
  double density = 1.0;          // kg/m^2 of surface
  double compliance = 1e-5;      // m/N, distance constraints
  std::optional<double> volume_compliance;
  std::vector<std::uint32_t> pinned;  // vertex indices with zero inverse mass
  double restitution = 0.3;      // rigid bodies only
  double friction = 0.5;         // rigid bodies only

  bool operator==(const ObjectSettings&) const = default;
};

struct SolverSettings {
  double dt = 1.0 / 90.0;
  int substeps = 4;
  int iterations = 8;
  double damping = 0.995;  // velocity retained per second

  bool operator==(const SolverSettings&) const = default;
};

struct GroundSettings {
  std::array<double, 3> normal{0.0, 0.0, 1.0};
  double offset = 0.0;
  double restitution = 0.3;
  double friction = 0.5;

  bool operator==(const GroundSettings&) const = default;
};

struct SceneMeta {
  std::string name = "scene";
  double units_per_meter = 1.0;
  std::array<double, 3> gravity{0.0, 0.0, -9.81};
  SolverSettings solver;
  std::optional<GroundSettings> ground;
  std::vector<ObjectSettings> objects;  // parallel to SceneBundle::objects

  bool operator==(const SceneMeta&) const = default;
};

struct SceneBundle {
  GaussianCloud static_cloud;
  std::vector<BoundObject> objects;
  SceneMeta meta;

  // Adds an object with default settings and returns its index.
  std::size_t add_object(BoundObject object, ObjectSettings settings = {});
  // Index of the object named `name`; throws UnknownObject.
  std::size_t object_index(std::string_view name) const;
  // Throws InvalidArgument on duplicate names or broken references.
  void validate() const;

  bool operator==(const SceneBundle&) const = default;
};

nlohmann::json meta_to_json(const SceneMeta& meta, const std::vector<BoundObject>& objects);
// Reads meta from JSON; returns object names in order. Missing keys keep defaults.
SceneMeta meta_from_json(const nlohmann::json& j, std::vector<std::string>* names = nullptr);

Bytes save_bundle(const SceneBundle& bundle);
SceneBundle load_bundle(ByteView bytes);

// Section payload codecs shared with the wire protocol.
void write_anchors(ByteWriter& out, std::span<const AnchoredGaussian> anchors);
std::vector<AnchoredGaussian> read_anchors(ByteReader& in);
void write_appearance(ByteWriter& out, const AppearanceTable& table);
AppearanceTable read_appearance(ByteReader& in);

}  // namespace gsverse
