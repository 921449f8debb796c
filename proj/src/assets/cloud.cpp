#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Geometry>

#include "gsverse/assets.hpp"
#include "gsverse/error.hpp"

namespace gsverse {

void GaussianCloud::resize(std::size_t n) {
  count = n;
  means.resize(3 * n);
  log_scales.resize(3 * n);
  rotations.resize(4 * n);
  opacity_logits.resize(n);
  sh_coeffs.resize(sh_stride() * n);
}

void GaussianCloud::push_from(const GaussianCloud& other, std::size_t i) {
  if (other.sh_degree != sh_degree) {
    throw Error(ErrorCode::InvalidArgument, "cannot mix SH degrees in one cloud");
  }
  means.insert(means.end(), other.means.begin() + 3 * i, other.means.begin() + 3 * i + 3);
  log_scales.insert(log_scales.end(), other.log_scales.begin() + 3 * i,
                    other.log_scales.begin() + 3 * i + 3);
  rotations.insert(rotations.end(), other.rotations.begin() + 4 * i,
                   other.rotations.begin() + 4 * i + 4);
  opacity_logits.push_back(other.opacity_logits[i]);
  const std::size_t stride = sh_stride();
  sh_coeffs.insert(sh_coeffs.end(), other.sh_coeffs.begin() + stride * i,
                   other.sh_coeffs.begin() + stride * (i + 1));
  ++count;
}

void GaussianCloud::validate() const {
  if (sh_degree < 0 || sh_degree > 3) {
    throw Error(ErrorCode::InvalidArgument, "sh_degree must be in [0,3]");
  }
  if (means.size() != 3 * count || log_scales.size() != 3 * count ||
      rotations.size() != 4 * count || opacity_logits.size() != count ||
      sh_coeffs.size() != sh_stride() * count) {
    throw Error(ErrorCode::InvalidArgument, "cloud array lengths inconsistent with count");
  }
  const auto finite = [](const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
  };
  if (!finite(means) || !finite(log_scales) || !finite(rotations) || !finite(opacity_logits) ||
      !finite(sh_coeffs)) {
    throw Error(ErrorCode::InvalidArgument, "cloud contains non-finite values");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const float* q = &rotations[4 * i];
    const double n = std::sqrt(double(q[0]) * q[0] + double(q[1]) * q[1] + double(q[2]) * q[2] +
                               double(q[3]) * q[3]);
    if (std::abs(n - 1.0) > 1e-4) {
      throw Error(ErrorCode::InvalidArgument,
                  "quaternion " + std::to_string(i) + " is not unit (norm " + std::to_string(n) + ")");
    }
  }
}

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double face_area(const TriMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  return triangle_area(mesh.vertices[f[0]].cast<double>(), mesh.vertices[f[1]].cast<double>(),
                       mesh.vertices[f[2]].cast<double>());
}

void validate_mesh(const TriMesh& mesh) {
  const std::size_t nv = mesh.vertices.size();
  if (mesh.labels && mesh.labels->size() != nv) {
    throw Error(ErrorCode::DegenerateMesh, "label count differs from vertex count");
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    for (auto idx : tri) {
      if (idx >= nv) {
        throw Error(ErrorCode::DegenerateMesh, "face " + std::to_string(f) + " index out of range");
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw Error(ErrorCode::DegenerateMesh, "face " + std::to_string(f) + " repeats a vertex");
    }
    if (!(face_area(mesh, f) > kMinFaceArea)) {
      throw Error(ErrorCode::DegenerateMesh, "face " + std::to_string(f) + " has (near) zero area");
    }
  }
}

std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh) {
  std::vector<std::array<std::uint32_t, 2>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[k];
      const auto b = f[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace gsverse
