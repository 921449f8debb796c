#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsverse/assets.hpp"

namespace gsverse {

// Relative thickness of a splat along its face normal.
inline constexpr double kEpsilonFlat = 1e-4;
inline constexpr double kRhoMin = 1e-3;
inline constexpr double kRhoMax = 4.0;

// Orthonormal triangle frame: columns are (first edge direction, in-plane
// perpendicular, normal). scale holds the std-dev extents along those axes.
struct FaceFrame {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d scale;
  Eigen::Vector3d origin;
};

// Throws DegenerateFace when the triangle area is not above kMinFaceArea.
FaceFrame face_frame(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2, const Eigen::Vector3d& v3);
// Non-throwing variant for hot paths.
std::optional<FaceFrame> try_face_frame(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                                        const Eigen::Vector3d& v3);

inline Eigen::Vector3d anchored_mean(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                                     const Eigen::Vector3d& v3, const Eigen::Vector3d& alpha) {
  return alpha[0] * v1 + alpha[1] * v2 + alpha[2] * v3;
}

// rho * R S S^T R^T.
Eigen::Matrix3d anchored_covariance(const FaceFrame& frame, double rho);

struct AnchoredGaussian {
  std::uint32_t face_id = 0;
  std::array<float, 3> alpha{};
  float rho = 1.0f;
  std::uint32_t appearance_id = 0;

  bool operator==(const AnchoredGaussian&) const = default;
};

// Opacity logits and SH coefficients referenced by anchors, one SH degree per table.
struct AppearanceTable {
  int sh_degree = 0;
  std::vector<float> opacity_logits;
  std::vector<float> sh_coeffs;  // 3 * (sh_degree+1)^2 per entry

  std::size_t size() const { return opacity_logits.size(); }
  std::size_t sh_stride() const { return 3 * sh_coeffs_per_channel(sh_degree); }

  bool operator==(const AppearanceTable&) const = default;
};

struct BoundObject {
  std::string name;
  TriMesh mesh;
  std::vector<AnchoredGaussian> anchors;
  AppearanceTable appearance;
  std::vector<Eigen::Vector3f> rest_vertices;

  // Throws InvalidArgument when face or appearance references are out of range.
  void validate() const;

  bool operator==(const BoundObject&) const = default;
};

// ---- nearest-face queries ---------------------------------------------------

struct ClosestPoint {
  Eigen::Vector3d point;
  double distance_sq = 0.0;
};

// Exact closest point on a triangle (region classification over vertices,
// edges, and interior).
ClosestPoint closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                       const Eigen::Vector3d& b, const Eigen::Vector3d& c);

// Barycentric coordinates of p with respect to (a, b, c), from a least-squares
// solve in the triangle plane; not clamped.
Eigen::Vector3d barycentric(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                            const Eigen::Vector3d& c);

// Median-split BVH over face bounding boxes.
class FaceBvh {
 public:
  explicit FaceBvh(const TriMesh& mesh);

  struct Hit {
    std::uint32_t face = 0;
    ClosestPoint closest;
  };
  // Nearest face by exact point-triangle distance; ties go to the lower face index.
  Hit nearest(const Eigen::Vector3d& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    std::uint32_t first = 0;  // leaf: offset into order_; inner: left child
    std::uint32_t count = 0;  // 0 for inner nodes
    std::uint32_t right = 0;
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end, int depth);

  std::vector<Eigen::Vector3d> verts_;
  std::vector<std::array<std::uint32_t, 3>> faces_;
  std::vector<Eigen::Vector3d> centroids_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

// ---- binding ----------------------------------------------------------------

struct BindOptions {
  unsigned threads = 1;
  std::string name = "object";
};

struct BindReport {
  double rms_distance = 0.0;
};

// Assigns each splat to its nearest face, projects it onto the simplex and
// derives rho from its two largest scales. Throws EmptyCloud / DegenerateMesh.
BoundObject bind_cloud(const GaussianCloud& cloud, const TriMesh& mesh, const BindOptions& options = {},
                       BindReport* report = nullptr);

// k anchors per face with uniform-simplex barycentrics from a counter-based
// generator keyed by (seed, face, slot).
BoundObject place_uniform(const TriMesh& mesh, std::uint32_t k, std::uint64_t seed,
                          const std::string& name = "object");

// Deterministic uniform sample on the 2-simplex for (seed, face, slot).
Eigen::Vector3d uniform_simplex_sample(std::uint64_t seed, std::uint64_t face, std::uint64_t slot);

}  // namespace gsverse
