#include <cmath>

#include <Eigen/Geometry>

#include "gsverse/error.hpp"
#include "gsverse/parallel.hpp"
#include "gsverse/propagate.hpp"

namespace gsverse {

using Eigen::Vector3d;

namespace {

struct FaceState {
  float quat[4];
  double scale[3];
  bool degenerate;
};

void frame_to_state(const FaceFrame& frame, double shrink, FaceState& st) {
  Eigen::Quaterniond q(frame.rotation);
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  st.quat[0] = static_cast<float>(q.w());
  st.quat[1] = static_cast<float>(q.x());
  st.quat[2] = static_cast<float>(q.y());
  st.quat[3] = static_cast<float>(q.z());
  for (int k = 0; k < 3; ++k) st.scale[k] = frame.scale[k] * shrink;
}

}  // namespace

Eigen::Matrix3d PropagationOutput::covariance(std::size_t i) const {
  const Eigen::Quaterniond q(rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]);
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  const Vector3d s(scales[3 * i], scales[3 * i + 1], scales[3 * i + 2]);
  return r * s.cwiseProduct(s).asDiagonal() * r.transpose();
}

void propagate_into(const BoundObject& object, std::span<const Eigen::Vector3f> vertices, PropagationOutput& out,
                    const PropagateOptions& options) {
  const auto& faces = object.mesh.faces;
  if (vertices.size() != object.mesh.vertices.size()) {
    throw Error(ErrorCode::DimensionMismatch, "object '" + object.name + "' has " +
                                                  std::to_string(object.mesh.vertices.size()) +
                                                  " vertices, got " + std::to_string(vertices.size()));
  }
  std::vector<FaceState> face_state(faces.size());
  parallel_for(faces.size(), options.threads, [&](std::size_t f) {
    const auto& tri = faces[f];
    FaceState& st = face_state[f];
    if (auto frame = try_face_frame(vertices[tri[0]].cast<double>(), vertices[tri[1]].cast<double>(),
                                    vertices[tri[2]].cast<double>())) {
      frame_to_state(*frame, 1.0, st);
      st.degenerate = false;
      return;
    }
    st.degenerate = true;
    const auto& rest = object.rest_vertices;
    if (auto rest_frame = try_face_frame(rest[tri[0]].cast<double>(), rest[tri[1]].cast<double>(),
                                         rest[tri[2]].cast<double>())) {
      frame_to_state(*rest_frame, kDegenerateFrameShrink, st);
    } else {
      FaceFrame identity{Eigen::Matrix3d::Identity(), Vector3d::Constant(1.0), Vector3d::Zero()};
      frame_to_state(identity, kDegenerateFrameShrink, st);
    }
  });

  const std::size_t n = object.anchors.size();
  out.count = n;
  out.means.resize(3 * n);
  out.rotations.resize(4 * n);
  out.scales.resize(3 * n);
  out.appearance_ids.resize(n);
  out.degenerate_faces.clear();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    if (face_state[f].degenerate) out.degenerate_faces.push_back(static_cast<std::uint32_t>(f));
  }

  parallel_for(n, options.threads, [&](std::size_t i) {
    const AnchoredGaussian& a = object.anchors[i];
    const auto& tri = faces[a.face_id];
    const FaceState& st = face_state[a.face_id];
    const Vector3d mean = double(a.alpha[0]) * vertices[tri[0]].cast<double>() +
                          double(a.alpha[1]) * vertices[tri[1]].cast<double>() +
                          double(a.alpha[2]) * vertices[tri[2]].cast<double>();
    const double root_rho = std::sqrt(static_cast<double>(a.rho));
    for (int k = 0; k < 3; ++k) {
      out.means[3 * i + k] = static_cast<float>(mean[k]);
      out.scales[3 * i + k] = static_cast<float>(root_rho * st.scale[k]);
    }
    for (int k = 0; k < 4; ++k) out.rotations[4 * i + k] = st.quat[k];
    out.appearance_ids[i] = a.appearance_id;
  });
}

PropagationOutput propagate(const BoundObject& object, std::span<const Eigen::Vector3f> vertices,
                            const PropagateOptions& options) {
  PropagationOutput out;
  propagate_into(object, vertices, out, options);
  return out;
}

GaussianCloud to_cloud(const BoundObject& object, const PropagationOutput& output) {
  GaussianCloud cloud;
  cloud.sh_degree = object.appearance.sh_degree;
  cloud.resize(output.count);
  cloud.means = output.means;
  cloud.rotations = output.rotations;
  const std::size_t stride = object.appearance.sh_stride();
  for (std::size_t i = 0; i < output.count; ++i) {
    for (int k = 0; k < 3; ++k) cloud.log_scales[3 * i + k] = std::log(output.scales[3 * i + k]);
    const std::uint32_t app = output.appearance_ids[i];
    cloud.opacity_logits[i] = object.appearance.opacity_logits[app];
    std::copy_n(object.appearance.sh_coeffs.begin() + app * stride, stride, cloud.sh_coeffs.begin() + i * stride);
  }
  return cloud;
}

GaussianCloud propagate_to_cloud(const BoundObject& object, std::span<const Eigen::Vector3f> vertices,
                                 const PropagateOptions& options) {
  return to_cloud(object, propagate(object, vertices, options));
}

}  // namespace gsverse
