#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

#include <Eigen/LU>

#include "gsverse/error.hpp"
#include "gsverse/physics.hpp"

namespace gsverse {

using Eigen::Matrix3d;
using Eigen::Quaterniond;
using Eigen::Vector3d;

namespace {

struct SubstepContext {
  Vector3d gravity;
  double h;
  double damp;  // per-substep velocity retention
  int iterations;
  const GroundPlane* ground;
};

// Per-step copy of a distance constraint with everything that stays fixed
// across substeps and iterations folded in.
struct PackedEdge {
  std::uint32_t i, j;
  double rest_length;
  double wi, wj;
  double alpha;      // compliance / h^2
  double inv_denom;  // 1 / (wi + wj + alpha)
};

// Greedy edge colouring: within one colour no two edges share a particle, so
// consecutive corrections carry no data dependency and the sweep pipelines.
// Gauss-Seidel order is (colour, edge index); deterministic for a given body.
// Edges between two pinned particles are dropped.
std::vector<PackedEdge> pack_edges(const SoftBody& body, double inv_h2) {
  constexpr int kColours = 64;
  std::vector<std::uint64_t> used(body.particle_count(), 0);
  std::vector<std::uint8_t> colour(body.edges.size());
  std::array<std::size_t, kColours + 1> count{};
  for (std::size_t e = 0; e < body.edges.size(); ++e) {
    const auto& c = body.edges[e];
    const std::uint64_t busy = used[c.i] | used[c.j];
    const int k = busy == ~0ull ? kColours : std::countr_one(busy);
    if (k < kColours) {
      used[c.i] |= 1ull << k;
      used[c.j] |= 1ull << k;
    }
    colour[e] = static_cast<std::uint8_t>(k);
    ++count[k];
  }
  std::array<std::size_t, kColours + 1> start{};
  for (int k = 1; k <= kColours; ++k) start[k] = start[k - 1] + count[k - 1];
  std::vector<PackedEdge> out(body.edges.size());
  std::vector<bool> live(body.edges.size());
  for (std::size_t e = 0; e < body.edges.size(); ++e) {
    const auto& c = body.edges[e];
    const double wi = body.inv_mass[c.i], wj = body.inv_mass[c.j], alpha = c.compliance * inv_h2;
    const std::size_t slot = start[colour[e]]++;
    out[slot] = {c.i, c.j, c.rest_length, wi, wj, alpha, 1.0 / (wi + wj + alpha)};
    live[slot] = wi + wj > 0.0;
  }
  std::size_t kept = 0;
  for (std::size_t e = 0; e < out.size(); ++e)
    if (live[e]) out[kept++] = out[e];
  out.resize(kept);
  return out;
}

void solve_edges(SoftBody& body, const std::vector<PackedEdge>& edges, std::vector<double>& lambda) {
  auto* x = body.positions.data();
  const std::size_t ne = edges.size();
  for (std::size_t e = 0; e < ne; ++e) {
    const PackedEdge& c = edges[e];
    const Vector3d d = x[c.i] - x[c.j];
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) continue;
    const double inv_len = 1.0 / std::sqrt(len2);
    const double len = len2 * inv_len;
    const double dlambda = (-(len - c.rest_length) - c.alpha * lambda[e]) * c.inv_denom;
    lambda[e] += dlambda;
    const Vector3d corr = (dlambda * inv_len) * d;
    x[c.i] += c.wi * corr;
    x[c.j] -= c.wj * corr;
  }
}

void solve_volume(SoftBody& body, double& lambda, double inv_h2, std::vector<Vector3d>& grad) {
  const VolumeConstraint& vc = *body.volume;
  auto& x = body.positions;
  std::fill(grad.begin(), grad.end(), Vector3d::Zero());
  double six_v = 0.0;
  for (const auto& f : body.faces) {
    six_v += x[f[0]].dot(x[f[1]].cross(x[f[2]]));
    grad[f[0]] += x[f[1]].cross(x[f[2]]) / 6.0;
    grad[f[1]] += x[f[2]].cross(x[f[0]]) / 6.0;
    grad[f[2]] += x[f[0]].cross(x[f[1]]) / 6.0;
  }
  double denom = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) denom += body.inv_mass[i] * grad[i].squaredNorm();
  const double alpha = vc.compliance * inv_h2;
  if (denom + alpha == 0.0) return;
  const double c = six_v / 6.0 - vc.rest_volume;
  const double dlambda = (-c - alpha * lambda) / (denom + alpha);
  lambda += dlambda;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += (body.inv_mass[i] * dlambda) * grad[i];
}

void solve_grabs(SoftBody& body) {
  for (const auto& g : body.grabs) {
    if (g.stiffness == 0.0) continue;
    double denom = 0.0;
    for (int k = 0; k < 3; ++k) denom += g.weights[k] * g.weights[k] * body.inv_mass[g.vertices[k]];
    if (denom == 0.0) continue;
    const Vector3d d = g.target - body.grab_point(g);
    for (int k = 0; k < 3; ++k) {
      const auto v = g.vertices[k];
      body.positions[v] += (g.stiffness * g.weights[k] * body.inv_mass[v] / denom) * d;
    }
  }
}

void collide_particle(Vector3d& x, Vector3d& v, const GroundPlane& ground) {
  const double depth = ground.offset - ground.normal.dot(x);
  if (depth <= 0.0) return;
  x += depth * ground.normal;
  const double vn = v.dot(ground.normal);
  if (vn >= 0.0) return;
  Vector3d vt = v - vn * ground.normal;
  const double dvn = -(1.0 + ground.restitution) * vn;
  const double vt_len = vt.norm();
  if (vt_len > 0.0) vt *= std::max(0.0, 1.0 - ground.friction * dvn / vt_len);
  v = vt - ground.restitution * vn * ground.normal;
}

void substep_soft(SoftBody& body, const SubstepContext& ctx, const std::vector<PackedEdge>& edges,
                  std::vector<double>& lambda, std::vector<Vector3d>& grad) {
  const std::size_t n = body.particle_count();
  const double h = ctx.h;
  for (std::size_t i = 0; i < n; ++i) {
    body.prev_positions[i] = body.positions[i];
    const double w = body.inv_mass[i];
    if (w == 0.0) continue;
    body.velocities[i] += h * (ctx.gravity + w * body.external_force[i]);
    body.positions[i] += h * body.velocities[i];
  }

  const double inv_h2 = 1.0 / (h * h);
  std::fill(lambda.begin(), lambda.end(), 0.0);
  double volume_lambda = 0.0;
  for (int it = 0; it < ctx.iterations; ++it) {
    solve_edges(body, edges, lambda);
    if (body.volume) solve_volume(body, volume_lambda, inv_h2, grad);
    solve_grabs(body);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (body.inv_mass[i] == 0.0) continue;
    body.velocities[i] = ((body.positions[i] - body.prev_positions[i]) / h) * ctx.damp;
    if (ctx.ground) collide_particle(body.positions[i], body.velocities[i], *ctx.ground);
  }
}

Vector3d support_point(const RigidBody& body, const Vector3d& direction) {
  if (const auto* sphere = std::get_if<SphereCollider>(&body.collider)) {
    return body.position + sphere->radius * direction.normalized();
  }
  const auto& hull = std::get<HullCollider>(body.collider);
  Vector3d best = body.position;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (const auto& p : hull.points) {
    const Vector3d wp = body.to_world(p);
    const double d = wp.dot(direction);
    if (d > best_dot) {
      best_dot = d;
      best = wp;
    }
  }
  return best;
}

Quaterniond integrate_rotation(const Quaterniond& q, const Vector3d& omega_dt) {
  if (omega_dt.isZero(0.0)) return q;  // keeps a resting pose bit-exact
  Quaterniond dq(0.0, omega_dt.x(), omega_dt.y(), omega_dt.z());
  dq = dq * q;
  Quaterniond out(q.w() + 0.5 * dq.w(), q.x() + 0.5 * dq.x(), q.y() + 0.5 * dq.y(), q.z() + 0.5 * dq.z());
  out.normalize();
  return out;
}

void apply_impulse(RigidBody& body, const Matrix3d& inv_i, const Vector3d& r, const Vector3d& impulse) {
  body.linear_velocity += body.inv_mass * impulse;
  body.angular_velocity += inv_i * r.cross(impulse);
}

void collide_rigid(RigidBody& body, const GroundPlane& ground, double h, double g_mag) {
  const Vector3d& n = ground.normal;
  const Vector3d p = support_point(body, -n);
  const double depth = ground.offset - n.dot(p);
  if (depth <= 0.0) return;
  body.position += depth * n;
  const Vector3d contact = p + depth * n;
  const Vector3d r = contact - body.position;
  const Matrix3d inv_i = body.world_inv_inertia();

  const Vector3d vc = body.linear_velocity + body.angular_velocity.cross(r);
  const double vn = vc.dot(n);
  if (vn >= 0.0) return;
  // Resting contact: do not bounce the velocity gravity added during one substep.
  const double e = -vn < 2.0 * g_mag * h ? 0.0 : body.restitution;
  const double kn = body.inv_mass + n.dot((inv_i * r.cross(n)).cross(r));
  const double jn = -(1.0 + e) * vn / kn;
  apply_impulse(body, inv_i, r, jn * n);

  const Vector3d vc2 = body.linear_velocity + body.angular_velocity.cross(r);
  const Vector3d vt = vc2 - vc2.dot(n) * n;
  const double vt_len = vt.norm();
  if (vt_len > 1e-12) {
    const Vector3d t = vt / vt_len;
    const double kt = body.inv_mass + t.dot((inv_i * r.cross(t)).cross(r));
    const double jt = std::min(vt_len / kt, body.friction * jn);
    apply_impulse(body, inv_i, r, -jt * t);
  }
}

void substep_rigid(RigidBody& body, const SubstepContext& ctx) {
  if (body.inv_mass == 0.0) return;
  const double h = ctx.h;
  body.linear_velocity += h * ctx.gravity;

  // Angular momentum is carried across the orientation update so torque-free
  // spin conserves it exactly rather than drifting with a frozen omega.
  const Matrix3d r0 = body.orientation.toRotationMatrix();
  const Vector3d momentum = r0 * body.inv_inertia.inverse() * r0.transpose() * body.angular_velocity;

  const Vector3d x_prev = body.position;
  const Quaterniond q_prev = body.orientation;
  body.position += h * body.linear_velocity;
  body.orientation = integrate_rotation(body.orientation, h * body.angular_velocity);
  const Matrix3d r1 = body.orientation.toRotationMatrix();
  body.angular_velocity = r1 * body.inv_inertia * r1.transpose() * momentum;

  if (!body.grabs.empty()) {
    bool moved = false;
    for (int it = 0; it < ctx.iterations; ++it) {
      for (const auto& g : body.grabs) {
        if (g.stiffness == 0.0) continue;
        const Vector3d r = body.orientation * g.local_point;
        const Vector3d d = g.target - (body.position + r);
        const double len = d.norm();
        if (len == 0.0) continue;
        const Vector3d n = d / len;
        const Matrix3d inv_i = body.world_inv_inertia();
        const Vector3d rn = r.cross(n);
        const double w = body.inv_mass + rn.dot(inv_i * rn);
        const Vector3d impulse = (g.stiffness * len / w) * n;
        body.position += body.inv_mass * impulse;
        body.orientation = integrate_rotation(body.orientation, inv_i * r.cross(impulse));
        moved = true;
      }
    }
    if (moved) {
      body.linear_velocity = (body.position - x_prev) / h;
      Quaterniond dq = body.orientation * q_prev.conjugate();
      if (dq.w() < 0.0) dq.coeffs() = -dq.coeffs();
      body.angular_velocity = 2.0 * dq.vec() / h;
    }
  }

  body.linear_velocity *= ctx.damp;
  body.angular_velocity *= ctx.damp;
  if (ctx.ground) collide_rigid(body, *ctx.ground, h, ctx.gravity.norm());
}

bool soft_finite(const SoftBody& b) {
  for (std::size_t i = 0; i < b.particle_count(); ++i) {
    if (!b.positions[i].allFinite() || !b.velocities[i].allFinite()) return false;
  }
  return true;
}

bool rigid_finite(const RigidBody& b) {
  return b.position.allFinite() && b.orientation.coeffs().allFinite() && b.linear_velocity.allFinite() &&
         b.angular_velocity.allFinite();
}

}  // namespace

void step(World& world) {
  if (!(world.dt > 0.0) || world.substeps < 1 || world.iterations < 1 ||
      !(world.damping >= 0.0 && world.damping <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "world requires dt > 0, substeps >= 1, iterations >= 1, damping in [0,1]");
  }
  std::optional<GroundPlane> ground;
  if (world.ground) {
    ground = *world.ground;
    ground->normal.normalize();
  }
  SubstepContext ctx;
  ctx.gravity = world.gravity;
  ctx.h = world.dt / world.substeps;
  ctx.damp = world.damping == 1.0 ? 1.0 : std::pow(world.damping, ctx.h);
  ctx.iterations = world.iterations;
  ctx.ground = ground ? &*ground : nullptr;

  for (std::size_t b = 0; b < world.soft_bodies.size(); ++b) {
    SoftBody& body = world.soft_bodies[b];
    if (body.external_force.size() != body.particle_count()) {
      body.external_force.assign(body.particle_count(), Vector3d::Zero());
    }
    const std::vector<PackedEdge> edges = pack_edges(body, 1.0 / (ctx.h * ctx.h));
    std::vector<double> lambda(edges.size());
    std::vector<Vector3d> grad(body.volume ? body.particle_count() : 0);
    for (int s = 0; s < world.substeps; ++s) substep_soft(body, ctx, edges, lambda, grad);
    std::fill(body.external_force.begin(), body.external_force.end(), Vector3d::Zero());
    if (!soft_finite(body)) {
      throw Error(ErrorCode::NonFiniteState, "soft body " + std::to_string(b) + " has non-finite state");
    }
  }
  for (std::size_t b = 0; b < world.rigid_bodies.size(); ++b) {
    RigidBody& body = world.rigid_bodies[b];
    for (int s = 0; s < world.substeps; ++s) substep_rigid(body, ctx);
    if (!rigid_finite(body)) {
      throw Error(ErrorCode::NonFiniteState, "rigid body " + std::to_string(b) + " has non-finite state");
    }
  }
}

}  // namespace gsverse
