#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "gsverse/reference.hpp"

namespace gsverse::reference {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector3d;

Image render_naive(const GaussianCloud& cloud, const Camera& camera, const Vector3d& background) {
  camera.validate();
  struct Splat {
    double depth;
    std::size_t index;
    double cx, cy;
    Matrix2d inv_cov;
    double opacity;
    Vector3d color;
  };
  std::vector<Splat> splats;
  const Matrix3d w = camera.rotation();
  const Vector3d t = camera.translation();
  const Vector3d eye = camera.center_world();
  const std::size_t stride = cloud.sh_stride();
  for (std::size_t i = 0; i < cloud.count; ++i) {
    const Vector3d m(cloud.means[3 * i], cloud.means[3 * i + 1], cloud.means[3 * i + 2]);
    const Vector3d pc = w * m + t;
    if (!(pc.z() > camera.near)) continue;
    const double z = pc.z();
    Eigen::Matrix<double, 2, 3> j;
    j << camera.fx / z, 0.0, -camera.fx * pc.x() / (z * z), 0.0, camera.fy / z, -camera.fy * pc.y() / (z * z);
    Matrix2d cov = (j * w) * splat_covariance(cloud, i) * (j * w).transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov += kScreenDilation * Matrix2d::Identity();
    const double det = cov.determinant();
    if (!(det > 0.0)) continue;
    const Vector3d dir = (m - eye).normalized();
    splats.push_back({z, i, camera.fx * pc.x() / z + camera.cx, camera.fy * pc.y() / z + camera.cy, cov.inverse(),
                      1.0 / (1.0 + std::exp(-double(cloud.opacity_logits[i]))),
                      eval_sh(std::span<const float>(cloud.sh_coeffs).subspan(i * stride, stride), dir,
                              cloud.sh_degree)});
  }
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
  });

  Image image(camera.width, camera.height);
  for (int py = 0; py < camera.height; ++py) {
    for (int px = 0; px < camera.width; ++px) {
      Vector3d color = Vector3d::Zero();
      double transmittance = 1.0;
      for (const Splat& s : splats) {
        const Eigen::Vector2d d(px - s.cx, py - s.cy);
        const double q = d.dot(s.inv_cov * d);
        if (q > kFootprintMahalanobisSq) continue;
        const double alpha = std::min(kMaxAlpha, s.opacity * std::exp(-0.5 * q));
        color += transmittance * alpha * s.color;
        transmittance *= (1.0 - alpha);
        if (transmittance < kMinTransmittance) break;
      }
      float* out = image.pixel(px, py);
      for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(color[c] + transmittance * background[c]);
      out[3] = static_cast<float>(1.0 - transmittance);
    }
  }
  return image;
}

std::uint32_t nearest_face_brute_force(const TriMesh& mesh, const Vector3d& p) {
  std::uint32_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& tri = mesh.faces[f];
    const double d2 = closest_point_on_triangle(p, mesh.vertices[tri[0]].cast<double>(),
                                                mesh.vertices[tri[1]].cast<double>(),
                                                mesh.vertices[tri[2]].cast<double>())
                          .distance_sq;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = f;
    }
  }
  return best;
}

}  // namespace gsverse::reference
