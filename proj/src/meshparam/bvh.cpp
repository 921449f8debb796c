#include <algorithm>
#include <numeric>

#include "gsverse/meshparam.hpp"

namespace gsverse {

using Eigen::Vector3d;

ClosestPoint closest_point_on_triangle(const Vector3d& p, const Vector3d& a, const Vector3d& b,
                                       const Vector3d& c) {
  auto result = [&p](const Vector3d& q) { return ClosestPoint{q, (p - q).squaredNorm()}; };
  const Vector3d ab = b - a;
  const Vector3d ac = c - a;
  const Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return result(a);

  const Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return result(b);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return result(a + (d1 / (d1 - d3)) * ab);

  const Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return result(c);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return result(a + (d2 / (d2 - d6)) * ac);

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return result(b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b));
  }

  const double denom = 1.0 / (va + vb + vc);
  return result(a + ab * (vb * denom) + ac * (vc * denom));
}

Vector3d barycentric(const Vector3d& p, const Vector3d& a, const Vector3d& b, const Vector3d& c) {
  const Vector3d v0 = b - a;
  const Vector3d v1 = c - a;
  const Vector3d v2 = p - a;
  const double d00 = v0.dot(v0);
  const double d01 = v0.dot(v1);
  const double d11 = v1.dot(v1);
  const double d20 = v2.dot(v0);
  const double d21 = v2.dot(v1);
  const double denom = d00 * d11 - d01 * d01;
  const double v = (d11 * d20 - d01 * d21) / denom;
  const double w = (d00 * d21 - d01 * d20) / denom;
  return {1.0 - v - w, v, w};
}

namespace {

double box_distance_sq(const Vector3d& p, const Vector3d& lo, const Vector3d& hi) {
  const Vector3d d = (lo - p).cwiseMax(Vector3d::Zero()).cwiseMax(p - hi);
  return d.squaredNorm();
}

constexpr std::uint32_t kLeafSize = 4;

}  // namespace

FaceBvh::FaceBvh(const TriMesh& mesh) : faces_(mesh.faces) {
  verts_.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) verts_.push_back(v.cast<double>());
  centroids_.reserve(faces_.size());
  for (const auto& f : faces_) centroids_.push_back((verts_[f[0]] + verts_[f[1]] + verts_[f[2]]) / 3.0);
  order_.resize(faces_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!faces_.empty()) {
    nodes_.reserve(2 * faces_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(faces_.size()), 0);
  }
}

std::uint32_t FaceBvh::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Vector3d lo = Vector3d::Constant(std::numeric_limits<double>::infinity());
  Vector3d hi = -lo;
  Vector3d clo = lo;
  Vector3d chi = hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    for (auto v : faces_[order_[i]]) {
      lo = lo.cwiseMin(verts_[v]);
      hi = hi.cwiseMax(verts_[v]);
    }
    clo = clo.cwiseMin(centroids_[order_[i]]);
    chi = chi.cwiseMax(centroids_[order_[i]]);
  }
  nodes_[index].lo = lo;
  nodes_[index].hi = hi;

  if (end - begin <= kLeafSize || depth > 64) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis;
  (chi - clo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t x, std::uint32_t y) {
                     const double cx = centroids_[x][axis];
                     const double cy = centroids_[y][axis];
                     return cx < cy || (cx == cy && x < y);
                   });
  const std::uint32_t left = build(begin, mid, depth + 1);
  const std::uint32_t right = build(mid, end, depth + 1);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

FaceBvh::Hit FaceBvh::nearest(const Vector3d& p) const {
  Hit best;
  best.face = std::numeric_limits<std::uint32_t>::max();
  best.closest.distance_sq = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;

  // Boxes are only skipped when strictly farther than the best hit (with a
  // relative guard for rounding), so equal-distance faces are always visited.
  auto prunable = [&best](double box_d2) {
    return box_d2 > best.closest.distance_sq * (1.0 + 1e-9) + 1e-300;
  };

  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (prunable(box_distance_sq(p, node.lo, node.hi))) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t f = order_[i];
        const auto& tri = faces_[f];
        const ClosestPoint cp = closest_point_on_triangle(p, verts_[tri[0]], verts_[tri[1]], verts_[tri[2]]);
        if (cp.distance_sq < best.closest.distance_sq ||
            (cp.distance_sq == best.closest.distance_sq && f < best.face)) {
          best.face = f;
          best.closest = cp;
        }
      }
      continue;
    }
    const Node& l = nodes_[node.first];
    const Node& r = nodes_[node.right];
    const double dl = box_distance_sq(p, l.lo, l.hi);
    const double dr = box_distance_sq(p, r.lo, r.hi);
    // Push the farther child first so the nearer one is popped next.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.first;
    } else {
      stack[top++] = node.first;
      stack[top++] = node.right;
    }
  }
  return best;
}

}  // namespace gsverse
