#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gsverse/assets.hpp"

namespace gsverse {

struct DistanceConstraint {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double rest_length = 0.0;
  double compliance = 0.0;
};

struct VolumeConstraint {
  double rest_volume = 0.0;
  double compliance = 0.0;
};

// Soft attachment of a barycentric point on one face to a target. Stiffness in
// [0,1] is the fraction of the residual removed per solver iteration.
struct GrabConstraint {
  std::uint32_t id = 0;
  std::uint32_t face = 0;
  std::array<std::uint32_t, 3> vertices{};
  Eigen::Vector3d weights = Eigen::Vector3d::Zero();
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double stiffness = 1.0;
};

struct SoftBody {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> prev_positions;
  std::vector<Eigen::Vector3d> velocities;
  std::vector<double> inv_mass;  // 0 = pinned
  std::vector<DistanceConstraint> edges;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::optional<VolumeConstraint> volume;
  std::vector<GrabConstraint> grabs;
  // External forces (N) applied for the duration of the next step, then cleared.
  std::vector<Eigen::Vector3d> external_force;

  std::size_t particle_count() const { return positions.size(); }
  Eigen::Vector3d grab_point(const GrabConstraint& g) const;
  double mass(std::size_t i) const { return inv_mass[i] > 0.0 ? 1.0 / inv_mass[i] : 0.0; }
};

// Signed volume enclosed by the faces at the given positions.
double enclosed_volume(std::span<const Eigen::Vector3d> positions,
                       std::span<const std::array<std::uint32_t, 3>> faces);

struct SoftBodyOptions {
  double density = 1.0;     // kg/m^2
  double compliance = 1e-5; // m/N
  std::optional<double> volume_compliance;  // enables the volume constraint
};

// One particle per vertex with area-lumped mass; unique edges as distance constraints.
SoftBody build_softbody(const TriMesh& mesh, const SoftBodyOptions& options);
void pin_vertices(SoftBody& body, std::span<const std::uint32_t> vertices);

// Installs a grab and returns its id (ids must be unique within the body).
// Throws InvalidFace.
void apply_grab(SoftBody& body, std::uint32_t grab_id, std::uint32_t face_id, const Eigen::Vector3d& bary,
                const Eigen::Vector3d& target, double stiffness);
bool move_grab(SoftBody& body, std::uint32_t grab_id, const Eigen::Vector3d& target);
bool release_grab(SoftBody& body, std::uint32_t grab_id);

// Positive magnitude pushes along -normal (inward on an outward-oriented surface).
// Accumulates into external_force for the next step. Throws InvalidFace.
void apply_pressure(SoftBody& body, std::span<const std::uint32_t> faces, double magnitude);

struct SphereCollider {
  double radius = 1.0;
};
struct HullCollider {
  std::vector<Eigen::Vector3d> points;  // body frame
};

struct RigidGrab {
  std::uint32_t id = 0;
  Eigen::Vector3d local_point = Eigen::Vector3d::Zero();
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double stiffness = 1.0;
};

struct RigidBody {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d linear_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();
  double inv_mass = 1.0;
  Eigen::Matrix3d inv_inertia = Eigen::Matrix3d::Identity();  // body frame
  std::variant<SphereCollider, HullCollider> collider = SphereCollider{};
  double restitution = 0.3;
  double friction = 0.5;
  std::vector<RigidGrab> grabs;

  Eigen::Matrix3d world_inv_inertia() const;
  Eigen::Vector3d angular_momentum() const;
  Eigen::Vector3d to_world(const Eigen::Vector3d& local) const { return position + orientation * local; }
};

// Rigid body from a closed mesh: area-lumped vertex masses, hull collider from
// the vertices, inertia of the lumped point set about its centre of mass.
// `com_out` receives the centre of mass in mesh coordinates.
RigidBody build_rigid(const TriMesh& mesh, double density, Eigen::Vector3d* com_out = nullptr);

struct GroundPlane {
  Eigen::Vector3d normal{0.0, 0.0, 1.0};
  double offset = 0.0;
  double restitution = 0.3;
  double friction = 0.5;
};

struct World {
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
  double dt = 1.0 / 90.0;
  int substeps = 4;
  int iterations = 8;
  double damping = 0.995;
  std::optional<GroundPlane> ground;
  std::vector<SoftBody> soft_bodies;
  std::vector<RigidBody> rigid_bodies;
};

// Advances every body by world.dt. Throws NonFiniteState naming the first bad
// body; throws InvalidArgument when dt/substeps/iterations are out of range.
void step(World& world);

}  // namespace gsverse
