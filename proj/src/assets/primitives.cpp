#include <cmath>
#include <map>
#include <numbers>

#include "gsverse/primitives.hpp"

namespace gsverse {

using Eigen::Vector3f;

TriMesh make_icosphere(int subdivisions, float radius, const Vector3f& center) {
  const float t = (1.0f + std::sqrt(5.0f)) / 2.0f;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<std::uint32_t, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const auto a = mid(tri[0], tri[1]);
      const auto b = mid(tri[1], tri[2]);
      const auto c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriMesh mesh;
  mesh.vertices.reserve(v.size());
  for (const auto& p : v) mesh.vertices.push_back(center + radius * p.cast<float>());
  mesh.faces = std::move(f);
  return mesh;
}

TriMesh make_cylinder(float radius, float height, int segments, int rings) {
  TriMesh mesh;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int r = 0; r <= rings; ++r) {
    const double z = height * double(r) / rings;
    for (int s = 0; s < segments; ++s) {
      const double a = two_pi * s / segments;
      mesh.vertices.emplace_back(float(radius * std::cos(a)), float(radius * std::sin(a)), float(z));
    }
  }
  auto idx = [segments](int r, int s) { return std::uint32_t(r * segments + (s % segments)); };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({idx(r, s), idx(r, s + 1), idx(r + 1, s + 1)});
      mesh.faces.push_back({idx(r, s), idx(r + 1, s + 1), idx(r + 1, s)});
    }
  }
  const auto bottom = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0f, 0.0f, 0.0f);
  const auto top = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0f, 0.0f, height);
  for (int s = 0; s < segments; ++s) {
    mesh.faces.push_back({bottom, idx(0, s + 1), idx(0, s)});
    mesh.faces.push_back({top, idx(rings, s), idx(rings, s + 1)});
  }
  return mesh;
}

TriMesh make_box(const Vector3f& h, const Vector3f& c) {
  TriMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back(c.x() + ((i & 1) ? h.x() : -h.x()), c.y() + ((i & 2) ? h.y() : -h.y()),
                               c.z() + ((i & 4) ? h.z() : -h.z()));
  }
  // Outward-facing quads, split along one diagonal each.
  const std::array<std::array<std::uint32_t, 4>, 6> quads = {{{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                                              {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}}};
  for (const auto& q : quads) {
    mesh.faces.push_back({q[0], q[1], q[2]});
    mesh.faces.push_back({q[0], q[2], q[3]});
  }
  return mesh;
}

TriMesh make_grid(int nx, int ny, float size) {
  TriMesh mesh;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) mesh.vertices.emplace_back(size * float(i) / nx, size * float(j) / ny, 0.0f);
  }
  auto idx = [nx](int i, int j) { return std::uint32_t(j * (nx + 1) + i); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      mesh.faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  return mesh;
}

}  // namespace gsverse
