#include <algorithm>
#include <cmath>

#include "gsverse/error.hpp"
#include "gsverse/physics.hpp"

namespace gsverse {

using Eigen::Vector3d;

Vector3d SoftBody::grab_point(const GrabConstraint& g) const {
  return g.weights[0] * positions[g.vertices[0]] + g.weights[1] * positions[g.vertices[1]] +
         g.weights[2] * positions[g.vertices[2]];
}

double enclosed_volume(std::span<const Vector3d> positions, std::span<const std::array<std::uint32_t, 3>> faces) {
  double six_v = 0.0;
  for (const auto& f : faces) six_v += positions[f[0]].dot(positions[f[1]].cross(positions[f[2]]));
  return six_v / 6.0;
}

SoftBody build_softbody(const TriMesh& mesh, const SoftBodyOptions& options) {
  if (mesh.faces.empty()) throw Error(ErrorCode::DegenerateMesh, "mesh has no faces");
  validate_mesh(mesh);
  if (!(options.density > 0.0) || !(options.compliance >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "density must be > 0 and compliance >= 0");
  }
  const std::size_t n = mesh.vertices.size();
  SoftBody body;
  body.positions.resize(n);
  for (std::size_t i = 0; i < n; ++i) body.positions[i] = mesh.vertices[i].cast<double>();
  body.prev_positions = body.positions;
  body.velocities.assign(n, Vector3d::Zero());
  body.external_force.assign(n, Vector3d::Zero());
  body.faces = mesh.faces;

  std::vector<double> mass(n, 0.0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const double third = options.density * face_area(mesh, f) / 3.0;
    for (auto v : mesh.faces[f]) mass[v] += third;
  }
  body.inv_mass.resize(n);
  for (std::size_t i = 0; i < n; ++i) body.inv_mass[i] = mass[i] > 0.0 ? 1.0 / mass[i] : 0.0;

  for (const auto& [a, b] : unique_edges(mesh)) {
    body.edges.push_back({a, b, (body.positions[a] - body.positions[b]).norm(), options.compliance});
  }
  if (options.volume_compliance) {
    body.volume = VolumeConstraint{enclosed_volume(body.positions, body.faces), *options.volume_compliance};
  }
  return body;
}

void pin_vertices(SoftBody& body, std::span<const std::uint32_t> vertices) {
  for (auto v : vertices) {
    if (v >= body.particle_count()) {
      throw Error(ErrorCode::InvalidArgument, "pinned vertex " + std::to_string(v) + " out of range");
    }
    body.inv_mass[v] = 0.0;
    body.velocities[v].setZero();
  }
}

void apply_grab(SoftBody& body, std::uint32_t grab_id, std::uint32_t face_id, const Vector3d& bary,
                const Vector3d& target, double stiffness) {
  if (face_id >= body.faces.size()) {
    throw Error(ErrorCode::InvalidFace, "face " + std::to_string(face_id) + " out of range");
  }
  if (!(stiffness >= 0.0 && stiffness <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "grab stiffness must be in [0,1]");
  }
  if (!bary.allFinite() || !target.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "grab barycentrics and target must be finite");
  }
  release_grab(body, grab_id);
  GrabConstraint g;
  g.id = grab_id;
  g.face = face_id;
  g.vertices = body.faces[face_id];
  g.weights = bary;
  g.target = target;
  g.stiffness = stiffness;
  body.grabs.push_back(g);
}

bool move_grab(SoftBody& body, std::uint32_t grab_id, const Vector3d& target) {
  for (auto& g : body.grabs) {
    if (g.id == grab_id) {
      g.target = target;
      return true;
    }
  }
  return false;
}

bool release_grab(SoftBody& body, std::uint32_t grab_id) {
  const auto before = body.grabs.size();
  std::erase_if(body.grabs, [grab_id](const GrabConstraint& g) { return g.id == grab_id; });
  return body.grabs.size() != before;
}

void apply_pressure(SoftBody& body, std::span<const std::uint32_t> faces, double magnitude) {
  for (auto f : faces) {
    if (f >= body.faces.size()) throw Error(ErrorCode::InvalidFace, "face " + std::to_string(f) + " out of range");
  }
  if (magnitude == 0.0) return;
  for (auto f : faces) {
    const auto& tri = body.faces[f];
    const Vector3d& a = body.positions[tri[0]];
    // |cross| = 2 * area and cross points along the outward normal.
    const Vector3d area_normal = 0.5 * (body.positions[tri[1]] - a).cross(body.positions[tri[2]] - a);
    const Vector3d share = (-magnitude / 3.0) * area_normal;
    for (auto v : tri) body.external_force[v] += share;
  }
}

}  // namespace gsverse
