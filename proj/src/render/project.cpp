#include <cmath>

#include <Eigen/Geometry>

#include "gsverse/error.hpp"
#include "gsverse/render.hpp"

namespace gsverse {

using Eigen::Matrix3d;
using Eigen::Vector3d;

void Camera::validate() const {
  if (!(fx > 0.0 && fy > 0.0) || width < 1 || height < 1 || !(near > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "camera needs fx, fy > 0, width, height >= 1, near > 0");
  }
  const Matrix3d r = rotation();
  if (!world_to_cam.allFinite() || (r.transpose() * r - Matrix3d::Identity()).norm() > 1e-5) {
    throw Error(ErrorCode::InvalidArgument, "camera world_to_cam must be a rigid transform");
  }
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.near = j.value("near", c.near);
    const auto& m = j.at("world_to_cam");
    std::vector<double> flat;
    if (m.size() == 4 && m[0].is_array()) {
      for (const auto& row : m) {
        for (const auto& v : row) flat.push_back(v.get<double>());
      }
    } else {
      flat = m.get<std::vector<double>>();
    }
    if (flat.size() != 16) throw Error(ErrorCode::InvalidArgument, "world_to_cam must have 16 entries");
    for (int r = 0; r < 4; ++r) {
      for (int k = 0; k < 4; ++k) c.world_to_cam(r, k) = flat[4 * r + k];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("camera JSON: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json camera_to_json(const Camera& c) {
  std::vector<double> flat;
  for (int r = 0; r < 4; ++r) {
    for (int k = 0; k < 4; ++k) flat.push_back(c.world_to_cam(r, k));
  }
  return {{"fx", c.fx}, {"fy", c.fy},         {"cx", c.cx},   {"cy", c.cy},
          {"width", c.width}, {"height", c.height}, {"near", c.near}, {"world_to_cam", flat}};
}

Camera look_at(const Vector3d& eye, const Vector3d& target, const Vector3d& up, int width, int height,
               double fx) {
  const Vector3d z = (target - eye).normalized();
  const Vector3d x = z.cross(up).normalized();
  const Vector3d y = z.cross(x);
  Camera c;
  c.fx = c.fy = fx;
  c.width = width;
  c.height = height;
  c.cx = 0.5 * (width - 1);
  c.cy = 0.5 * (height - 1);
  Matrix3d r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  c.world_to_cam.setIdentity();
  c.world_to_cam.topLeftCorner<3, 3>() = r;
  c.world_to_cam.topRightCorner<3, 1>() = -r * eye;
  return c;
}

std::optional<ProjectedGaussian> project_gaussian(const Vector3d& mean, const Matrix3d& covariance,
                                                  const Camera& camera) {
  const Matrix3d w = camera.rotation();
  const Vector3d t = w * mean + camera.translation();
  if (!(t.z() > camera.near)) return std::nullopt;

  const double inv_z = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << camera.fx * inv_z, 0.0, -camera.fx * t.x() * inv_z * inv_z,
         0.0, camera.fy * inv_z, -camera.fy * t.y() * inv_z * inv_z;
  const Eigen::Matrix<double, 2, 3> tw = jac * w;

  ProjectedGaussian p;
  p.center = {camera.fx * t.x() * inv_z + camera.cx, camera.fy * t.y() * inv_z + camera.cy};
  p.cov2d = tw * covariance * tw.transpose();
  p.cov2d(0, 1) = p.cov2d(1, 0) = 0.5 * (p.cov2d(0, 1) + p.cov2d(1, 0));
  p.cov2d(0, 0) += kScreenDilation;
  p.cov2d(1, 1) += kScreenDilation;
  p.depth = t.z();
  if (!p.center.allFinite() || !p.cov2d.allFinite()) return std::nullopt;

  const double rx = 3.0 * std::sqrt(p.cov2d(0, 0)) * (1.0 + 1e-9) + 1e-9;
  const double ry = 3.0 * std::sqrt(p.cov2d(1, 1)) * (1.0 + 1e-9) + 1e-9;
  if (p.center.x() + rx < 0.0 || p.center.x() - rx > camera.width - 1 || p.center.y() + ry < 0.0 ||
      p.center.y() - ry > camera.height - 1) {
    return std::nullopt;
  }
  return p;
}

Matrix3d splat_covariance(const GaussianCloud& cloud, std::size_t i) {
  const float* q = &cloud.rotations[4 * i];
  const Matrix3d r = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
  Vector3d var;
  for (int k = 0; k < 3; ++k) var[k] = std::exp(2.0 * static_cast<double>(cloud.log_scales[3 * i + k]));
  return r * var.asDiagonal() * r.transpose();
}

}  // namespace gsverse
