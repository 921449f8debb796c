#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "gsverse/error.hpp"
#include "gsverse/meshparam.hpp"

namespace gsverse {

std::optional<FaceFrame> try_face_frame(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                                        const Eigen::Vector3d& v3) {
  const Eigen::Vector3d e1 = v2 - v1;
  const Eigen::Vector3d e2 = v3 - v1;
  const Eigen::Vector3d cross = e1.cross(e2);
  const double cross_norm = cross.norm();
  if (!(0.5 * cross_norm > kMinFaceArea)) return std::nullopt;

  const double s1 = e1.norm();
  const Eigen::Vector3d r1 = e1 / s1;
  const Eigen::Vector3d n = cross / cross_norm;
  const Eigen::Vector3d r2 = n.cross(r1);
  const double s2 = std::abs(e2.dot(r2));

  FaceFrame frame;
  frame.rotation.col(0) = r1;
  frame.rotation.col(1) = r2;
  frame.rotation.col(2) = n;
  frame.scale = Eigen::Vector3d(s1, s2, kEpsilonFlat * std::max(s1, s2));
  frame.origin = v1;
  return frame;
}

FaceFrame face_frame(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2, const Eigen::Vector3d& v3) {
  auto frame = try_face_frame(v1, v2, v3);
  if (!frame) {
    throw Error(ErrorCode::DegenerateFace,
                "triangle area " + std::to_string(triangle_area(v1, v2, v3)) + " is below threshold");
  }
  return *frame;
}

Eigen::Matrix3d anchored_covariance(const FaceFrame& frame, double rho) {
  const Eigen::Vector3d variances = frame.scale.cwiseProduct(frame.scale);
  return rho * (frame.rotation * variances.asDiagonal() * frame.rotation.transpose());
}

void BoundObject::validate() const {
  const std::size_t nf = mesh.faces.size();
  if (rest_vertices.size() != mesh.vertices.size()) {
    throw Error(ErrorCode::InvalidArgument, "object '" + name + "': rest vertex count mismatch");
  }
  if (appearance.sh_degree < 0 || appearance.sh_degree > 3 ||
      appearance.sh_coeffs.size() != appearance.size() * appearance.sh_stride()) {
    throw Error(ErrorCode::InvalidArgument, "object '" + name + "': appearance table is inconsistent");
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto& a = anchors[i];
    if (a.face_id >= nf || a.appearance_id >= appearance.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "object '" + name + "': anchor " + std::to_string(i) + " references are out of range");
    }
  }
}

}  // namespace gsverse
