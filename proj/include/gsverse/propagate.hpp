#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gsverse/assets.hpp"
#include "gsverse/meshparam.hpp"

namespace gsverse {

// Per-splat world-space Gaussians. Covariance is carried as a rotation
// quaternion (w, x, y, z) plus per-axis std-devs: Sigma = R diag(s^2) R^T.
struct PropagationOutput {
  std::size_t count = 0;
  std::vector<float> means;      // 3 * count
  std::vector<float> rotations;  // 4 * count
  std::vector<float> scales;     // 3 * count, sqrt(rho) * face scale
  std::vector<std::uint32_t> appearance_ids;
  // Faces whose deformed area fell below threshold; their splats use the
  // rest-pose frame shrunk by kDegenerateFrameShrink.
  std::vector<std::uint32_t> degenerate_faces;

  Eigen::Matrix3d covariance(std::size_t i) const;

  bool operator==(const PropagationOutput&) const = default;
};

inline constexpr double kDegenerateFrameShrink = 1e-6;

struct PropagateOptions {
  unsigned threads = 1;
};

// Rematerializes every anchor from the given vertex positions: mean from the
// barycentric weights, covariance from the face frame scaled by rho. Throws
// DimensionMismatch when the vertex count does not match the mesh.
PropagationOutput propagate(const BoundObject& object, std::span<const Eigen::Vector3f> vertices,
                            const PropagateOptions& options = {});

// Same pass, writing into a reusable output (no reallocation when sizes match).
void propagate_into(const BoundObject& object, std::span<const Eigen::Vector3f> vertices,
                    PropagationOutput& out, const PropagateOptions& options = {});

// Renderable cloud: log_scales = log(sqrt(rho) * s), appearance copied.
GaussianCloud to_cloud(const BoundObject& object, const PropagationOutput& output);
GaussianCloud propagate_to_cloud(const BoundObject& object, std::span<const Eigen::Vector3f> vertices,
                                 const PropagateOptions& options = {});

}  // namespace gsverse
