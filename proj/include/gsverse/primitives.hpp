#pragma once

#include "gsverse/assets.hpp"

namespace gsverse {

// Closed, outward-oriented meshes for demos, benches and tests.
TriMesh make_icosphere(int subdivisions, float radius = 1.0f, const Eigen::Vector3f& center = Eigen::Vector3f::Zero());
// Capped cylinder along +z from z = 0 to z = height.
TriMesh make_cylinder(float radius, float height, int segments, int rings);
TriMesh make_box(const Eigen::Vector3f& half_extents, const Eigen::Vector3f& center = Eigen::Vector3f::Zero());
// Open nx-by-ny quad grid in the z = 0 plane spanning [0, size]^2.
TriMesh make_grid(int nx, int ny, float size);

}  // namespace gsverse
