#pragma once

// Slow, obviously-correct counterparts of the production kernels. Used by the
// test suites and by `gsverse render --verify`; never on a hot path.

#include <cstdint>

#include "gsverse/assets.hpp"
#include "gsverse/meshparam.hpp"
#include "gsverse/render.hpp"

namespace gsverse::reference {

// Every splat evaluated at every pixel: no viewport culling, no tiling, exact
// (depth, index) ordering.
Image render_naive(const GaussianCloud& cloud, const Camera& camera, const Eigen::Vector3d& background);

// O(F) scan; ties resolved to the lower face index.
std::uint32_t nearest_face_brute_force(const TriMesh& mesh, const Eigen::Vector3d& p);

}  // namespace gsverse::reference
