#include <algorithm>
#include <cmath>

#include "gsverse/error.hpp"
#include "gsverse/meshparam.hpp"
#include "gsverse/parallel.hpp"

namespace gsverse {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::array<float, 3> to_simplex(Eigen::Vector3d alpha) {
  alpha = alpha.cwiseMax(0.0);
  const double sum = alpha.sum();
  if (!(sum > 0.0)) alpha = Eigen::Vector3d::Constant(1.0 / 3.0);
  else alpha /= sum;
  return {static_cast<float>(alpha[0]), static_cast<float>(alpha[1]), static_cast<float>(alpha[2])};
}

}  // namespace

Eigen::Vector3d uniform_simplex_sample(std::uint64_t seed, std::uint64_t face, std::uint64_t slot) {
  const std::uint64_t key = splitmix64(splitmix64(seed) ^ (face * 0xD1B54A32D192ED03ull)) ^ slot;
  const std::uint64_t r1 = splitmix64(key);
  const std::uint64_t r2 = splitmix64(r1);
  const double su = std::sqrt(unit_double(r1));
  const double v = unit_double(r2);
  return {1.0 - su, su * (1.0 - v), su * v};
}

BoundObject bind_cloud(const GaussianCloud& cloud, const TriMesh& mesh, const BindOptions& options,
                       BindReport* report) {
  if (cloud.count == 0) throw Error(ErrorCode::EmptyCloud, "cannot bind an empty cloud");
  if (mesh.faces.empty()) throw Error(ErrorCode::DegenerateMesh, "mesh has no faces");
  validate_mesh(mesh);
  cloud.validate();

  std::vector<FaceFrame> frames;
  frames.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces) {
    frames.push_back(face_frame(mesh.vertices[f[0]].cast<double>(), mesh.vertices[f[1]].cast<double>(),
                                mesh.vertices[f[2]].cast<double>()));
  }
  const FaceBvh bvh(mesh);

  BoundObject object;
  object.name = options.name;
  object.mesh = mesh;
  object.rest_vertices = mesh.vertices;
  object.anchors.resize(cloud.count);
  std::vector<double> dist_sq(cloud.count);

  parallel_for(cloud.count, options.threads, [&](std::size_t i) {
    const Eigen::Vector3d p(cloud.means[3 * i], cloud.means[3 * i + 1], cloud.means[3 * i + 2]);
    const auto hit = bvh.nearest(p);
    const auto& tri = mesh.faces[hit.face];
    const Eigen::Vector3d alpha =
        barycentric(hit.closest.point, mesh.vertices[tri[0]].cast<double>(),
                    mesh.vertices[tri[1]].cast<double>(), mesh.vertices[tri[2]].cast<double>());

    std::array<double, 3> s;
    for (int k = 0; k < 3; ++k) s[k] = std::exp(static_cast<double>(cloud.log_scales[3 * i + k]));
    std::sort(s.begin(), s.end());
    const double splat_extent = std::sqrt(s[1] * s[2]);
    const auto& fs = frames[hit.face].scale;
    const double face_extent = std::sqrt(fs[0] * fs[1]);
    // Covariance scales linearly in rho, so std-devs scale with sqrt(rho).
    const double ratio = splat_extent / face_extent;
    const double rho = std::clamp(ratio * ratio, kRhoMin, kRhoMax);

    auto& anchor = object.anchors[i];
    anchor.face_id = hit.face;
    anchor.alpha = to_simplex(alpha);
    anchor.rho = static_cast<float>(rho);
    anchor.appearance_id = static_cast<std::uint32_t>(i);
    dist_sq[i] = hit.closest.distance_sq;
  });

  object.appearance.sh_degree = cloud.sh_degree;
  object.appearance.opacity_logits = cloud.opacity_logits;
  object.appearance.sh_coeffs = cloud.sh_coeffs;

  if (report) {
    double sum = 0.0;
    for (double d : dist_sq) sum += d;
    report->rms_distance = std::sqrt(sum / static_cast<double>(cloud.count));
  }
  return object;
}

BoundObject place_uniform(const TriMesh& mesh, std::uint32_t k, std::uint64_t seed, const std::string& name) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  BoundObject object;
  object.name = name;
  object.mesh = mesh;
  object.rest_vertices = mesh.vertices;
  const std::size_t total = mesh.faces.size() * k;
  object.anchors.resize(total);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    for (std::uint32_t slot = 0; slot < k; ++slot) {
      const std::size_t i = f * k + slot;
      auto& anchor = object.anchors[i];
      anchor.face_id = static_cast<std::uint32_t>(f);
      anchor.alpha = to_simplex(uniform_simplex_sample(seed, f, slot));
      anchor.rho = 1.0f;
      anchor.appearance_id = static_cast<std::uint32_t>(i);
    }
  }
  object.appearance.sh_degree = 0;
  object.appearance.opacity_logits.assign(total, 0.0f);
  object.appearance.sh_coeffs.assign(3 * total, 0.0f);
  return object;
}

}  // namespace gsverse
