#include <cmath>

#include <Eigen/LU>

#include "gsverse/error.hpp"
#include "gsverse/physics.hpp"

namespace gsverse {

using Eigen::Matrix3d;
using Eigen::Vector3d;

Matrix3d RigidBody::world_inv_inertia() const {
  const Matrix3d r = orientation.toRotationMatrix();
  return r * inv_inertia * r.transpose();
}

Vector3d RigidBody::angular_momentum() const {
  const Matrix3d r = orientation.toRotationMatrix();
  return r * inv_inertia.inverse() * r.transpose() * angular_velocity;
}

RigidBody build_rigid(const TriMesh& mesh, double density, Vector3d* com_out) {
  if (mesh.faces.empty()) throw Error(ErrorCode::DegenerateMesh, "mesh has no faces");
  validate_mesh(mesh);
  const std::size_t n = mesh.vertices.size();
  std::vector<double> mass(n, 0.0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const double third = density * face_area(mesh, f) / 3.0;
    for (auto v : mesh.faces[f]) mass[v] += third;
  }
  double total = 0.0;
  Vector3d com = Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    total += mass[i];
    com += mass[i] * mesh.vertices[i].cast<double>();
  }
  com /= total;

  Matrix3d inertia = Matrix3d::Zero();
  HullCollider hull;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector3d r = mesh.vertices[i].cast<double>() - com;
    inertia += mass[i] * (r.squaredNorm() * Matrix3d::Identity() - r * r.transpose());
    hull.points.push_back(r);
  }
  // Lumped flat meshes can have a vanishing principal moment.
  inertia += 1e-9 * inertia.trace() * Matrix3d::Identity();

  RigidBody body;
  body.position = com;
  body.inv_mass = 1.0 / total;
  body.inv_inertia = inertia.inverse();
  body.collider = std::move(hull);
  if (com_out) *com_out = com;
  return body;
}

}  // namespace gsverse
