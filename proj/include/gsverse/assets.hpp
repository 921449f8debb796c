#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gsverse/bytes.hpp"

namespace gsverse {

// Real SH coefficients per colour channel for a given degree.
constexpr std::size_t sh_coeffs_per_channel(int degree) {
  return static_cast<std::size_t>((degree + 1) * (degree + 1));
}

// Zeroth-band SH constant; rgb = 0.5 + kShC0 * dc.
inline constexpr float kShC0 = 0.28209479177387814f;

// Flat splat arrays in the usual 3DGS storage convention: log scales, opacity
// logits, quaternions as (w, x, y, z), and SH laid out [splat][channel][coeff].
struct GaussianCloud {
  std::size_t count = 0;
  int sh_degree = 0;
  std::vector<float> means;           // 3 * count
  std::vector<float> log_scales;      // 3 * count
  std::vector<float> rotations;       // 4 * count
  std::vector<float> opacity_logits;  // count
  std::vector<float> sh_coeffs;       // 3 * (sh_degree+1)^2 * count

  std::size_t sh_stride() const { return 3 * sh_coeffs_per_channel(sh_degree); }

  void resize(std::size_t n);
  // Appends splat `index` of `other`; both clouds must share sh_degree.
  void push_from(const GaussianCloud& other, std::size_t index);
  // Throws InvalidArgument when array sizes, quaternion norms or values break invariants.
  void validate() const;

  bool operator==(const GaussianCloud&) const = default;
};

struct TriMesh {
  std::vector<Eigen::Vector3f> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::optional<std::vector<std::int32_t>> labels;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }

  bool operator==(const TriMesh&) const = default;
};

inline constexpr double kMinFaceArea = 1e-12;

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c);
double face_area(const TriMesh& mesh, std::size_t face);
// Throws DegenerateMesh on out-of-range indices, repeated vertices or tiny faces.
void validate_mesh(const TriMesh& mesh);
// Unique undirected edges sorted by (min index, max index).
std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh);

// ---- splat PLY -------------------------------------------------------------

GaussianCloud load_gaussian_ply(ByteView bytes);
Bytes save_gaussian_ply(const GaussianCloud& cloud);

// ---- Wavefront OBJ ---------------------------------------------------------

struct ObjLoadResult {
  TriMesh mesh;
  std::size_t dropped_faces = 0;
};

// Polygons are fan-triangulated; zero-area and repeated-index triangles are dropped
// and counted. When the file declares `o` groups, labels holds the group index of
// each vertex (by declaration position).
ObjLoadResult load_obj(std::string_view text);
std::string save_obj(const TriMesh& mesh);

// ---- segmentation ----------------------------------------------------------

struct Aabb {
  Eigen::Vector3f min;
  Eigen::Vector3f max;
  bool contains(const Eigen::Vector3f& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

// Per-splat instance labels; negative labels go to the static remainder.
struct LabelMap {
  std::vector<std::int32_t> labels;
};

using Regions = std::variant<std::vector<Aabb>, LabelMap>;

struct SegmentResult {
  std::vector<GaussianCloud> objects;
  GaussianCloud static_cloud;
  // Source splat indices of each output, same order as the clouds.
  std::vector<std::vector<std::size_t>> object_indices;
  std::vector<std::size_t> static_indices;
};

// Boxes: first matching box wins, one output per box in list order.
// Label map: one output per distinct non-negative label in ascending order.
SegmentResult segment_split(const GaussianCloud& cloud, const Regions& regions);

}  // namespace gsverse
