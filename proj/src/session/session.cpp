#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "gsverse/error.hpp"
#include "gsverse/session.hpp"

namespace gsverse {

using Eigen::Vector3d;
using Eigen::Vector3f;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

World make_world(const SceneMeta& meta) {
  World w;
  w.gravity = Vector3d(meta.gravity[0], meta.gravity[1], meta.gravity[2]);
  w.dt = meta.solver.dt;
  w.substeps = meta.solver.substeps;
  w.iterations = meta.solver.iterations;
  w.damping = meta.solver.damping;
  if (meta.ground) {
    GroundPlane g;
    g.normal = Vector3d(meta.ground->normal[0], meta.ground->normal[1], meta.ground->normal[2]).normalized();
    g.offset = meta.ground->offset;
    g.restitution = meta.ground->restitution;
    g.friction = meta.ground->friction;
    w.ground = g;
  }
  return w;
}

// Principal axes of the vertex cloud, largest spread first, each signed so its
// largest-magnitude component is positive.
struct Principal {
  Vector3d centroid;
  std::array<Vector3d, 3> axes;
};

Principal principal_axes(const std::vector<Vector3d>& verts) {
  Principal p;
  p.centroid = Vector3d::Zero();
  for (const auto& v : verts) p.centroid += v;
  p.centroid /= double(verts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : verts) cov += (v - p.centroid) * (v - p.centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  for (int k = 0; k < 3; ++k) {
    Vector3d a = eig.eigenvectors().col(2 - k);
    Eigen::Index imax = 0;
    a.cwiseAbs().maxCoeff(&imax);
    if (a[imax] < 0) a = -a;
    p.axes[k] = a;
  }
  return p;
}

std::vector<Vector3d> face_centroids(const TriMesh& mesh, const std::vector<Vector3d>& verts) {
  std::vector<Vector3d> c(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    c[f] = (verts[t[0]] + verts[t[1]] + verts[t[2]]) / 3.0;
  }
  return c;
}

// argmax of score over faces; strict comparison keeps the lower index on ties.
template <typename Score>
std::uint32_t best_face(std::size_t count, Score score) {
  std::uint32_t best = 0;
  double best_s = -std::numeric_limits<double>::infinity();
  for (std::uint32_t f = 0; f < count; ++f) {
    const double s = score(f);
    if (s > best_s) {
      best_s = s;
      best = f;
    }
  }
  return best;
}

std::size_t step_count(double duration, double dt) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::max(0.0, duration) / dt)));
}

}  // namespace

// ---- stats ------------------------------------------------------------------

void FrameTimeHistogram::record(double ms) {
  samples_.push_back(std::max(0.0, ms));
  while (samples_.size() > window_) samples_.pop_front();
}

void FrameTimeHistogram::add_to_last(double ms) {
  if (!samples_.empty()) samples_.back() += std::max(0.0, ms);
}

FrameStats FrameTimeHistogram::summary(std::size_t splats_per_frame) const {
  if (samples_.empty()) throw Error(ErrorCode::NoFramesYet, "no frame has been timed");
  std::vector<double> sorted(samples_.begin(), samples_.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  auto rank = [&](double q) { return sorted[std::size_t(std::ceil(q * double(n))) - 1]; };
  FrameStats s;
  s.frames = n;
  s.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / double(n);
  s.p50_ms = rank(0.5);
  s.p99_ms = rank(0.99);
  s.splats_per_s = s.mean_ms > 0.0 ? double(splats_per_frame) * 1000.0 / s.mean_ms : 0.0;
  return s;
}

// ---- session ----------------------------------------------------------------

Session::Session(SceneBundle bundle, SessionOptions options)
    : bundle_(std::move(bundle)), options_(options), world_(make_world(bundle_.meta)) {
  bundle_.validate();
  bindings_.resize(bundle_.objects.size());
  frame_.vertices.resize(bundle_.objects.size());
  if (options_.propagate) frame_.splats.resize(bundle_.objects.size());
  for (std::size_t i = 0; i < bundle_.objects.size(); ++i) {
    const BoundObject& obj = bundle_.objects[i];
    const ObjectSettings settings = i < bundle_.meta.objects.size() ? bundle_.meta.objects[i] : ObjectSettings{};
    TriMesh rest = obj.mesh;
    rest.vertices = obj.rest_vertices;
    Binding& b = bindings_[i];
    b.kind = settings.body;
    if (settings.body == BodyKind::Soft) {
      SoftBody body = build_softbody(rest, {settings.density, settings.compliance, settings.volume_compliance});
      pin_vertices(body, settings.pinned);
      b.body = world_.soft_bodies.size();
      world_.soft_bodies.push_back(std::move(body));
    } else if (settings.body == BodyKind::Rigid) {
      RigidBody body = build_rigid(rest, settings.density, &b.com);
      body.restitution = settings.restitution;
      body.friction = settings.friction;
      for (const auto& v : rest.vertices) b.local.push_back(v.cast<double>() - b.com);
      b.body = world_.rigid_bodies.size();
      world_.rigid_bodies.push_back(std::move(body));
    }
    anchor_count_ += obj.anchors.size();
  }
}

const Session::Binding& Session::binding(std::uint32_t object) const {
  if (object >= bindings_.size()) {
    throw Error(ErrorCode::UnknownObject, "object " + std::to_string(object) + " not in scene");
  }
  return bindings_[object];
}

std::vector<Vector3f> Session::object_vertices(std::size_t object) const {
  const Binding& b = binding(static_cast<std::uint32_t>(object));
  switch (b.kind) {
    case BodyKind::Soft: {
      const auto& pos = world_.soft_bodies[b.body].positions;
      std::vector<Vector3f> out(pos.size());
      for (std::size_t v = 0; v < pos.size(); ++v) out[v] = pos[v].cast<float>();
      return out;
    }
    case BodyKind::Rigid: {
      const RigidBody& body = world_.rigid_bodies[b.body];
      // An unmoved body reports its rest vertices exactly.
      if (body.position == b.com && body.orientation.coeffs() == Eigen::Quaterniond::Identity().coeffs()) break;
      std::vector<Vector3f> out(b.local.size());
      for (std::size_t v = 0; v < b.local.size(); ++v) out[v] = body.to_world(b.local[v]).cast<float>();
      return out;
    }
    case BodyKind::Static: break;
  }
  return bundle_.objects[object].rest_vertices;
}

double Session::kinetic_energy() const {
  double e = 0.0;
  for (const auto& body : world_.soft_bodies) {
    for (std::size_t i = 0; i < body.particle_count(); ++i) e += 0.5 * body.mass(i) * body.velocities[i].squaredNorm();
  }
  for (const auto& body : world_.rigid_bodies) {
    if (body.inv_mass > 0.0) e += 0.5 * body.linear_velocity.squaredNorm() / body.inv_mass;
    e += 0.5 * body.angular_velocity.dot(body.angular_momentum());
  }
  return e;
}

Vector3d Session::surface_point(std::uint32_t object, std::uint32_t face, const Vector3d& bary) const {
  const auto verts = object_vertices(object);
  const auto& t = bundle_.objects[object].mesh.faces[face];
  return bary[0] * verts[t[0]].cast<double>() + bary[1] * verts[t[1]].cast<double>() +
         bary[2] * verts[t[2]].cast<double>();
}

std::uint32_t Session::apply_grab(const GrabAction& grab) {
  const Binding& b = binding(grab.object);
  const auto& mesh = bundle_.objects[grab.object].mesh;
  if (grab.face >= mesh.faces.size()) {
    throw Error(ErrorCode::InvalidFace, "face " + std::to_string(grab.face) + " out of range");
  }
  if (b.kind == BodyKind::Static) throw Error(ErrorCode::InvalidArgument, "static objects cannot be grabbed");
  if (!grab.bary.allFinite() || grab.bary.minCoeff() < 0.0 || !(grab.bary.sum() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grab barycentrics must be non-negative with positive sum");
  }
  const Vector3d bary = grab.bary / grab.bary.sum();
  const double stiffness = std::clamp(grab.stiffness, 0.0, 1.0);
  const std::uint32_t id = grab.grab_id.value_or(next_grab_);
  if (grabs_.contains(id)) throw Error(ErrorCode::InvalidArgument, "grab " + std::to_string(id) + " already active");
  if (id < kMacroGrabBase) next_grab_ = std::max(next_grab_, id + 1);
  const Vector3d target = grab.target.value_or(surface_point(grab.object, grab.face, bary));

  if (b.kind == BodyKind::Soft) {
    gsverse::apply_grab(world_.soft_bodies[b.body], id, grab.face, bary, target, stiffness);
  } else {
    RigidBody& body = world_.rigid_bodies[b.body];
    const Vector3d p = surface_point(grab.object, grab.face, bary);
    body.grabs.push_back({id, body.orientation.conjugate() * (p - body.position), target, stiffness});
  }
  grabs_[id] = grab.object;
  return id;
}

std::uint32_t Session::apply(const Action& action) {
  if (const auto* g = std::get_if<GrabAction>(&action)) return apply_grab(*g);

  auto lookup = [&](std::uint32_t id) -> const Binding& {
    const auto it = grabs_.find(id);
    if (it == grabs_.end()) throw Error(ErrorCode::InvalidArgument, "grab " + std::to_string(id) + " is not active");
    return bindings_[it->second];
  };

  if (const auto* m = std::get_if<MoveTargetAction>(&action)) {
    if (!m->target.allFinite()) throw Error(ErrorCode::InvalidArgument, "grab target must be finite");
    const Binding& b = lookup(m->grab_id);
    if (b.kind == BodyKind::Soft) {
      move_grab(world_.soft_bodies[b.body], m->grab_id, m->target);
    } else {
      for (auto& g : world_.rigid_bodies[b.body].grabs) {
        if (g.id == m->grab_id) g.target = m->target;
      }
    }
  } else if (const auto* r = std::get_if<ReleaseAction>(&action)) {
    const Binding& b = lookup(r->grab_id);
    if (b.kind == BodyKind::Soft) {
      release_grab(world_.soft_bodies[b.body], r->grab_id);
    } else {
      auto& grabs = world_.rigid_bodies[b.body].grabs;
      std::erase_if(grabs, [&](const RigidGrab& g) { return g.id == r->grab_id; });
    }
    grabs_.erase(r->grab_id);
  } else if (const auto* p = std::get_if<PressureAction>(&action)) {
    const Binding& b = binding(p->object);
    if (b.kind != BodyKind::Soft) throw Error(ErrorCode::InvalidArgument, "pressure needs a soft body");
    SoftBody& body = world_.soft_bodies[b.body];
    if (p->volume_compliance && body.volume) body.volume->compliance = *p->volume_compliance;
    if (p->magnitude != 0.0) {
      if (p->faces.empty()) {
        std::vector<std::uint32_t> all(body.faces.size());
        std::iota(all.begin(), all.end(), 0u);
        apply_pressure(body, all, p->magnitude);
      } else {
        apply_pressure(body, p->faces, p->magnitude);
      }
    }
  } else if (const auto* mac = std::get_if<MacroAction>(&action)) {
    auto events = expand_macro(*mac);
    for (const auto& ev : events) {
      if (std::holds_alternative<GrabAction>(ev.action)) ++next_macro_grab_;
    }
    for (auto& ev : events) schedule(ev.t, std::move(ev.action));
  }
  return 0;
}

void Session::schedule(const GestureScript& script) {
  for (const auto& ev : script.events) schedule(ev.t, ev.action);
}

void Session::schedule(double t, Action action) { pending_.emplace(std::make_pair(t, pending_seq_++), std::move(action)); }

const FrameOutput& Session::emit() {
  const auto start = Clock::now();
  frame_.frame_index = steps_;
  frame_.sim_time = clock();
  for (std::size_t i = 0; i < bundle_.objects.size(); ++i) {
    frame_.vertices[i] = object_vertices(i);
    if (options_.propagate) {
      propagate_into(bundle_.objects[i], frame_.vertices[i], frame_.splats[i], {options_.threads});
    }
  }
  stats_.record(last_step_ms_ + elapsed_ms(start));
  last_step_ms_ = 0.0;
  return frame_;
}

void Session::advance() {
  const auto start = Clock::now();
  // Events at or before the current boundary; the slack absorbs float noise in
  // script times written as decimals.
  const double due = clock() + 1e-9 * std::max(1.0, std::abs(clock()));
  while (!pending_.empty() && pending_.begin()->first.first <= due) {
    auto node = pending_.extract(pending_.begin());
    apply(node.mapped());
  }
  try {
    step(world_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteState) throw;
    throw Error(ErrorCode::NonFiniteState, "frame " + std::to_string(steps_ + 1) + ": " + e.detail());
  }
  ++steps_;
  last_step_ms_ = elapsed_ms(start);
}

// ---- macros -----------------------------------------------------------------

std::vector<GestureEvent> Session::expand_macro(const MacroAction& macro) const {
  const Binding& b = binding(macro.object);
  const TriMesh& mesh = bundle_.objects[macro.object].mesh;
  const double dt = world_.dt;
  auto at = [&](std::size_t i) { return double(steps_ + i) * dt; };
  const auto& P = macro.params;

  std::vector<Vector3d> verts;
  for (const auto& v : object_vertices(macro.object)) verts.push_back(v.cast<double>());
  const Principal pa = principal_axes(verts);
  const auto centroids = face_centroids(mesh, verts);
  const Vector3d third = Vector3d::Constant(1.0 / 3.0);

  std::vector<GestureEvent> out;
  std::uint32_t next_id = next_macro_grab_;
  auto grab = [&](std::uint32_t face, double stiffness) {
    const std::uint32_t id = next_id++;
    out.push_back({at(0), GrabAction{macro.object, face, third, stiffness, id, centroids[face]}});
    return id;
  };
  auto release_after = [&](std::size_t end_step, double hold, std::initializer_list<std::uint32_t> ids) {
    if (hold < 0.0) return;
    const double t = at(end_step + static_cast<std::size_t>(std::llround(hold / dt)));
    for (auto id : ids) out.push_back({t, ReleaseAction{id}});
  };
  auto stiffness_of = [](float s) { return s > 0.0f ? std::min(1.0, double(s)) : 1.0; };
  auto to_axis = [&](std::uint32_t f) { return (centroids[f] - pa.centroid).dot(pa.axes[0]); };

  if (b.kind == BodyKind::Static) throw Error(ErrorCode::InvalidArgument, "macros need a dynamic object");
  const bool soft = b.kind == BodyKind::Soft;

  switch (macro.kind) {
    case MacroKind::Stretch:
    case MacroKind::Twist: {
      const auto hi = best_face(mesh.faces.size(), [&](std::uint32_t f) { return to_axis(f); });
      const auto lo = best_face(mesh.faces.size(), [&](std::uint32_t f) { return -to_axis(f); });
      if (hi == lo) throw Error(ErrorCode::InvalidArgument, "object has no extent along its principal axis");
      const double s = stiffness_of(P[3]);
      const auto id_hi = grab(hi, s);
      const auto id_lo = grab(lo, s);
      const std::size_t n = step_count(P[1], dt);
      const Vector3d& a = pa.axes[0];
      for (std::size_t i = 1; i <= n; ++i) {
        const double u = double(i) / double(n);
        Vector3d t_hi, t_lo;
        if (macro.kind == MacroKind::Stretch) {
          t_hi = centroids[hi] + 0.5 * double(P[0]) * u * a;
          t_lo = centroids[lo] - 0.5 * double(P[0]) * u * a;
        } else {
          const Eigen::AngleAxisd r_hi(double(P[0]) * u, a), r_lo(-double(P[0]) * u, a);
          t_hi = pa.centroid + r_hi * (centroids[hi] - pa.centroid);
          t_lo = pa.centroid + r_lo * (centroids[lo] - pa.centroid);
        }
        out.push_back({at(i), MoveTargetAction{id_hi, t_hi}});
        out.push_back({at(i), MoveTargetAction{id_lo, t_lo}});
      }
      release_after(n, P[2], {id_hi, id_lo});
      break;
    }
    case MacroKind::Shake: {
      const int k = std::clamp(static_cast<int>(P[3]), 0, 2);
      const auto face = best_face(mesh.faces.size(), [&](std::uint32_t f) { return to_axis(f); });
      const auto id = grab(face, 1.0);
      const std::size_t n = step_count(P[2], dt);
      const double omega = 2.0 * std::numbers::pi * double(P[1]);
      for (std::size_t i = 1; i <= n; ++i) {
        const double t = double(i) * dt;
        out.push_back({at(i), MoveTargetAction{id, centroids[face] + double(P[0]) * std::sin(omega * t) * pa.axes[k]}});
      }
      out.push_back({at(n), ReleaseAction{id}});
      break;
    }
    case MacroKind::Crush:
    case MacroKind::Inflate: {
      if (!soft) throw Error(ErrorCode::InvalidArgument, "pressure macros need a soft body");
      const bool inflate = macro.kind == MacroKind::Inflate;
      const double magnitude = inflate ? -std::abs(double(P[0])) : std::abs(double(P[0]));
      const std::size_t n = step_count(P[1], dt);
      const auto& volume = world_.soft_bodies[b.body].volume;
      const bool loosen = inflate && P[2] > 0.0f && volume.has_value();
      for (std::size_t i = 0; i < n; ++i) {
        PressureAction p{macro.object, {}, magnitude, std::nullopt};
        if (loosen && i == 0) p.volume_compliance = double(P[2]);
        out.push_back({at(i), std::move(p)});
      }
      if (loosen) out.push_back({at(n), PressureAction{macro.object, {}, 0.0, volume->compliance}});
      break;
    }
    case MacroKind::Tip: {
      Vector3d up = -world_.gravity;
      up = up.norm() > 1e-12 ? up.normalized() : Vector3d::UnitZ();
      std::size_t side = 0;
      for (std::size_t k = 1; k < 3; ++k) {
        if (std::abs(pa.axes[k].dot(up)) < std::abs(pa.axes[side].dot(up))) side = k;
      }
      Vector3d dir = pa.axes[side] - pa.axes[side].dot(up) * up;
      dir = dir.norm() > 1e-9 ? dir.normalized() : up.unitOrthogonal();
      // Top rim on the trailing side, pushed over the leading bottom edge.
      const auto face = best_face(mesh.faces.size(), [&](std::uint32_t f) {
        const Vector3d d = centroids[f] - pa.centroid;
        return d.dot(up) - 1e-3 * d.dot(dir);
      });
      double low = std::numeric_limits<double>::infinity(), lead = -std::numeric_limits<double>::infinity();
      for (const auto& v : verts) {
        low = std::min(low, (v - pa.centroid).dot(up));
        lead = std::max(lead, (v - pa.centroid).dot(dir));
      }
      const Vector3d pivot = pa.centroid + low * up + lead * dir;
      const Vector3d hinge = up.cross(dir);
      const auto id = grab(face, stiffness_of(P[3]));
      const std::size_t n = step_count(P[1], dt);
      for (std::size_t i = 1; i <= n; ++i) {
        const Eigen::AngleAxisd r(double(P[0]) * double(i) / double(n), hinge);
        out.push_back({at(i), MoveTargetAction{id, pivot + r * (centroids[face] - pivot)}});
      }
      release_after(n, P[2], {id});
      break;
    }
  }
  return out;
}

std::vector<GestureEvent> expand_macro(const MacroAction& macro, const Session& session) {
  return session.expand_macro(macro);
}

void run_script(const SceneBundle& bundle, const GestureScript& script, std::uint64_t frames, const FrameSink& sink,
                const SessionOptions& options) {
  script.validate(bundle);
  Session session(bundle, options);
  session.schedule(script);
  for (std::uint64_t f = 0; f < frames; ++f) {
    if (f > 0) session.advance();
    sink(session.emit(), session);
  }
}

}  // namespace gsverse
