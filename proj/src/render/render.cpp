#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gsverse/error.hpp"
#include "gsverse/parallel.hpp"
#include "gsverse/render.hpp"

namespace gsverse {

using Eigen::Vector3d;

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Vector3d eval_sh(std::span<const float> coeffs, const Vector3d& dir, int degree) {
  const std::size_t k = sh_coeffs_per_channel(degree);
  const double x = dir.x(), y = dir.y(), z = dir.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  Vector3d rgb;
  for (int ch = 0; ch < 3; ++ch) {
    const float* c = coeffs.data() + ch * k;
    double v = double(kShC0) * c[0];
    if (degree >= 1) v += -kC1 * y * c[1] + kC1 * z * c[2] - kC1 * x * c[3];
    if (degree >= 2) {
      v += kC2[0] * x * y * c[4] + kC2[1] * y * z * c[5] + kC2[2] * (2.0 * zz - xx - yy) * c[6] +
           kC2[3] * x * z * c[7] + kC2[4] * (xx - yy) * c[8];
    }
    if (degree >= 3) {
      v += kC3[0] * y * (3.0 * xx - yy) * c[9] + kC3[1] * x * y * z * c[10] +
           kC3[2] * y * (4.0 * zz - xx - yy) * c[11] + kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * c[12] +
           kC3[4] * x * (4.0 * zz - xx - yy) * c[13] + kC3[5] * z * (xx - yy) * c[14] +
           kC3[6] * x * (xx - 3.0 * yy) * c[15];
    }
    rgb[ch] = std::max(0.0, v + 0.5);
  }
  return rgb;
}

std::vector<ScreenSplat> prepare_splats(const GaussianCloud& cloud, const Camera& camera) {
  camera.validate();
  const Vector3d eye = camera.center_world();
  std::vector<ScreenSplat> splats;
  const std::size_t stride = cloud.sh_stride();
  for (std::size_t i = 0; i < cloud.count; ++i) {
    const Vector3d mean(cloud.means[3 * i], cloud.means[3 * i + 1], cloud.means[3 * i + 2]);
    auto proj = project_gaussian(mean, splat_covariance(cloud, i), camera);
    if (!proj) continue;
    const Eigen::Matrix2d& cov = proj->cov2d;
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
    if (!(det > 0.0)) continue;
    ScreenSplat s;
    s.index = i;
    s.proj = *proj;
    s.conic = Vector3d(cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det);
    s.opacity = sigmoid(cloud.opacity_logits[i]);
    Vector3d dir = mean - eye;
    const double len = dir.norm();
    dir = len > 0.0 ? Vector3d(dir / len) : Vector3d(0.0, 0.0, 1.0);
    s.color = eval_sh(std::span<const float>(cloud.sh_coeffs).subspan(i * stride, stride), dir, cloud.sh_degree);
    splats.push_back(s);
  }
  std::stable_sort(splats.begin(), splats.end(),
                   [](const ScreenSplat& a, const ScreenSplat& b) { return a.proj.depth < b.proj.depth; });
  return splats;
}

Image render(const GaussianCloud& cloud, const Camera& camera, const RenderOptions& options) {
  const auto splats = prepare_splats(cloud, camera);
  const int ts = std::max(1, options.tile_size);
  const int tiles_x = (camera.width + ts - 1) / ts;
  const int tiles_y = (camera.height + ts - 1) / ts;

  // Bin by the exact bounding box of the 3-sigma ellipse; lists stay depth-ordered.
  std::vector<std::vector<std::uint32_t>> bins(std::size_t(tiles_x) * tiles_y);
  for (std::size_t s = 0; s < splats.size(); ++s) {
    const auto& p = splats[s].proj;
    // Padded so rounding in q can never admit a pixel outside the bin range.
    const double rx = 3.0 * std::sqrt(p.cov2d(0, 0)) * (1.0 + 1e-9) + 1e-9;
    const double ry = 3.0 * std::sqrt(p.cov2d(1, 1)) * (1.0 + 1e-9) + 1e-9;
    const int x0 = std::max(0, static_cast<int>(std::ceil(p.center.x() - rx)));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::floor(p.center.x() + rx)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(p.center.y() - ry)));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::floor(p.center.y() + ry)));
    if (x0 > x1 || y0 > y1) continue;
    for (int ty = y0 / ts; ty <= y1 / ts; ++ty) {
      for (int tx = x0 / ts; tx <= x1 / ts; ++tx) bins[std::size_t(ty) * tiles_x + tx].push_back(std::uint32_t(s));
    }
  }

  Image image(camera.width, camera.height);
  const Vector3d bg = options.background;
  parallel_for(bins.size(), options.threads, [&](std::size_t tile) {
    const int tx = static_cast<int>(tile % tiles_x);
    const int ty = static_cast<int>(tile / tiles_x);
    const auto& list = bins[tile];
    for (int py = ty * ts; py < std::min(camera.height, (ty + 1) * ts); ++py) {
      for (int px = tx * ts; px < std::min(camera.width, (tx + 1) * ts); ++px) {
        Vector3d color = Vector3d::Zero();
        double transmittance = 1.0;
        for (const std::uint32_t s : list) {
          const ScreenSplat& sp = splats[s];
          const double dx = px - sp.proj.center.x();
          const double dy = py - sp.proj.center.y();
          const double q = sp.conic[0] * dx * dx + 2.0 * sp.conic[1] * dx * dy + sp.conic[2] * dy * dy;
          if (q > kFootprintMahalanobisSq) continue;
          const double alpha = std::min(kMaxAlpha, sp.opacity * std::exp(-0.5 * q));
          color += (transmittance * alpha) * sp.color;
          transmittance *= 1.0 - alpha;
          if (transmittance < kMinTransmittance) break;
        }
        float* out = image.pixel(px, py);
        for (int c = 0; c < 3; ++c) out[c] = static_cast<float>(color[c] + transmittance * bg[c]);
        out[3] = static_cast<float>(1.0 - transmittance);
      }
    }
  });
  return image;
}

double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch, "images differ in size");
  }
  double sum = 0.0;
  const std::size_t n = std::size_t(a.width) * a.height;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = double(a.rgba[4 * i + c]) - double(b.rgba[4 * i + c]);
      sum += d * d;
    }
  }
  return n == 0 ? 0.0 : sum / double(3 * n);
}

double psnr(const Image& image, const Image& reference) {
  const double e = mse(image, reference);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / e);
}

}  // namespace gsverse
