#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "gsverse/assets.hpp"
#include "gsverse/bytes.hpp"

namespace gsverse {

// Pinhole camera looking down +z in camera space, pixel centres at integer
// coordinates.
struct Camera {
  double fx = 500.0, fy = 500.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  Eigen::Matrix4d world_to_cam = Eigen::Matrix4d::Identity();
  double near = 0.01;

  void validate() const;
  Eigen::Matrix3d rotation() const { return world_to_cam.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return world_to_cam.topRightCorner<3, 1>(); }
  Eigen::Vector3d center_world() const { return -rotation().transpose() * translation(); }
};

Camera camera_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const Camera& camera);
// Camera at `eye` looking at `target` with the image +y axis pointing away from `up`.
Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up, int width,
               int height, double fx);

// Linear RGBA, premultiplied and composited over the background.
struct Image {
  int width = 0, height = 0;
  std::vector<float> rgba;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgba(std::size_t(w) * h * 4, 0.0f) {}
  float* pixel(int x, int y) { return &rgba[(std::size_t(y) * width + x) * 4]; }
  const float* pixel(int x, int y) const { return &rgba[(std::size_t(y) * width + x) * 4]; }
};

struct ProjectedGaussian {
  Eigen::Vector2d center;
  Eigen::Matrix2d cov2d;  // includes the 0.3 px^2 dilation
  double depth = 0.0;
};

inline constexpr double kScreenDilation = 0.3;
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinTransmittance = 1e-4;
// Footprint cut-off: squared Mahalanobis radius of the 3-sigma ellipse.
inline constexpr double kFootprintMahalanobisSq = 9.0;

// EWA affine projection; nullopt when behind the near plane or when the
// 3-sigma ellipse misses the viewport.
std::optional<ProjectedGaussian> project_gaussian(const Eigen::Vector3d& mean, const Eigen::Matrix3d& covariance,
                                                  const Camera& camera);

// coeffs: 3 channels x (degree+1)^2, channel-major. view_dir must be unit length.
Eigen::Vector3d eval_sh(std::span<const float> coeffs, const Eigen::Vector3d& view_dir, int degree);

// World-space covariance of splat i from its log-scales and quaternion.
Eigen::Matrix3d splat_covariance(const GaussianCloud& cloud, std::size_t i);

// Screen-space splat after culling, sorted by the renderers.
struct ScreenSplat {
  std::size_t index = 0;
  ProjectedGaussian proj;
  Eigen::Vector3d conic;  // inverse cov2d as (a, b, c)
  double opacity = 0.0;
  Eigen::Vector3d color;
};

// Projects, shades and depth-sorts (stable on input order) every visible splat.
std::vector<ScreenSplat> prepare_splats(const GaussianCloud& cloud, const Camera& camera);

struct RenderOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  unsigned threads = 1;
  int tile_size = 16;
};

// Tiled front-to-back compositing.
Image render(const GaussianCloud& cloud, const Camera& camera, const RenderOptions& options = {});

// PSNR over RGB in [0,1]; +infinity for identical images. Throws DimensionMismatch.
double psnr(const Image& image, const Image& reference);
double mse(const Image& image, const Image& reference);

// 8-bit RGB PNG with 1/2.2 gamma.
Bytes encode_png(const Image& image);
void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace gsverse
