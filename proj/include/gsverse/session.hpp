#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "gsverse/bundle.hpp"
#include "gsverse/physics.hpp"
#include "gsverse/propagate.hpp"

namespace gsverse {

enum class MacroKind : std::uint8_t { Stretch = 1, Twist = 2, Shake = 3, Crush = 4, Inflate = 5, Tip = 6 };

std::string_view to_string(MacroKind kind);
std::optional<MacroKind> macro_kind_from_string(std::string_view name);
std::optional<MacroKind> macro_kind_from_code(std::uint8_t code);

// Grab ids handed out to clients and explicit script grabs stay below this;
// macro expansions allocate from here upward so the two never collide.
inline constexpr std::uint32_t kMacroGrabBase = 0x80000000u;

struct GrabAction {
  std::uint32_t object = 0;
  std::uint32_t face = 0;
  Eigen::Vector3d bary = Eigen::Vector3d::Constant(1.0 / 3.0);
  double stiffness = 1.0;
  std::optional<std::uint32_t> grab_id;   // allocated on apply when absent
  std::optional<Eigen::Vector3d> target;  // attach point when absent
  bool operator==(const GrabAction&) const = default;
};

struct MoveTargetAction {
  std::uint32_t grab_id = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  bool operator==(const MoveTargetAction&) const = default;
};

struct ReleaseAction {
  std::uint32_t grab_id = 0;
  bool operator==(const ReleaseAction&) const = default;
};

// Empty faces means every face. Positive magnitude pushes inward.
struct PressureAction {
  std::uint32_t object = 0;
  std::vector<std::uint32_t> faces;
  double magnitude = 0.0;
  std::optional<double> volume_compliance;  // replaces the body's volume compliance
  bool operator==(const PressureAction&) const = default;
};

// Parameter meaning per kind:
//   STRETCH [amplitude, duration, hold, stiffness]   amplitude = added separation
//   TWIST   [angle, duration, hold, stiffness]       each end turns by +-angle
//   SHAKE   [amplitude, frequency, duration, axis]   axis = principal-axis index
//   CRUSH   [magnitude, duration, -, -]
//   INFLATE [magnitude, duration, volume_compliance, -]
//   TIP     [angle, duration, hold, stiffness]
// A negative hold keeps the grabs; stiffness <= 0 means 1.
struct MacroAction {
  MacroKind kind = MacroKind::Stretch;
  std::uint32_t object = 0;
  std::array<float, 4> params{};
  bool operator==(const MacroAction&) const = default;
};

using Action = std::variant<GrabAction, MoveTargetAction, ReleaseAction, PressureAction, MacroAction>;

struct GestureEvent {
  double t = 0.0;
  Action action;
  bool operator==(const GestureEvent&) const = default;
};

struct GestureScript {
  std::vector<GestureEvent> events;

  // Times non-decreasing, objects/faces in range, and move/release ids live at
  // their time. Throws InvalidArgument, UnknownObject, or InvalidFace.
  void validate(const SceneBundle& bundle) const;
  bool operator==(const GestureScript&) const = default;
};

// Objects may be given by index or by name; names need the bundle.
GestureScript script_from_json(const nlohmann::json& j, const SceneBundle* bundle = nullptr);
nlohmann::json script_to_json(const GestureScript& script, const SceneBundle* bundle = nullptr);

struct FrameStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double splats_per_s = 0.0;
  std::size_t frames = 0;
};

// Rolling window of per-frame wall times.
class FrameTimeHistogram {
 public:
  explicit FrameTimeHistogram(std::size_t window = 4096) : window_(window) {}
  void record(double ms);
  void add_to_last(double ms);
  std::size_t size() const { return samples_.size(); }
  // Throws NoFramesYet when empty.
  FrameStats summary(std::size_t splats_per_frame) const;

 private:
  std::size_t window_;
  std::deque<double> samples_;
};

struct SessionOptions {
  unsigned threads = 1;   // propagate workers
  bool propagate = true;  // false streams vertices only
};

struct FrameOutput {
  std::uint64_t frame_index = 0;
  double sim_time = 0.0;
  std::vector<std::vector<Eigen::Vector3f>> vertices;  // per object
  std::vector<PropagationOutput> splats;               // per object, empty when not propagating
};

class Session {
 public:
  explicit Session(SceneBundle bundle, SessionOptions options = {});

  const SceneBundle& bundle() const { return bundle_; }
  const World& world() const { return world_; }
  World& world() { return world_; }
  double clock() const { return double(steps_) * world_.dt; }
  std::uint64_t frame_index() const { return steps_; }

  // Current vertex positions of one object in float precision.
  std::vector<Eigen::Vector3f> object_vertices(std::size_t object) const;
  double kinetic_energy() const;
  bool grab_active(std::uint32_t grab_id) const { return grabs_.contains(grab_id); }
  std::size_t active_grabs() const { return grabs_.size(); }

  // Queues events; each fires at the first step boundary whose clock reaches t.
  void schedule(const GestureScript& script);
  void schedule(double t, Action action);
  // Applies immediately. Returns the grab id for grabs, 0 otherwise.
  std::uint32_t apply(const Action& action);

  // State at the current clock; propagation time is recorded in the stats.
  const FrameOutput& emit();
  // Applies due events then steps once. NonFiniteState carries the frame index.
  void advance();

  void add_encode_time(double ms) { stats_.add_to_last(ms); }
  FrameStats frame_stats() const { return stats_.summary(anchor_count_); }

  // Macro expansion at the current clock and state; does not schedule.
  std::vector<GestureEvent> expand_macro(const MacroAction& macro) const;

 private:
  struct Binding {
    BodyKind kind = BodyKind::Static;
    std::size_t body = 0;
    Eigen::Vector3d com = Eigen::Vector3d::Zero();
    std::vector<Eigen::Vector3d> local;  // rigid: rest vertices about the COM
  };

  const Binding& binding(std::uint32_t object) const;
  std::uint32_t apply_grab(const GrabAction& grab);
  Eigen::Vector3d surface_point(std::uint32_t object, std::uint32_t face, const Eigen::Vector3d& bary) const;

  SceneBundle bundle_;
  SessionOptions options_;
  World world_;
  std::vector<Binding> bindings_;
  std::map<std::uint32_t, std::uint32_t> grabs_;  // grab id -> object
  std::map<std::pair<double, std::uint64_t>, Action> pending_;
  std::uint64_t pending_seq_ = 0;
  std::uint32_t next_grab_ = 0;
  std::uint32_t next_macro_grab_ = kMacroGrabBase;
  std::uint64_t steps_ = 0;
  double last_step_ms_ = 0.0;
  std::size_t anchor_count_ = 0;
  FrameOutput frame_;
  FrameTimeHistogram stats_;
};

std::vector<GestureEvent> expand_macro(const MacroAction& macro, const Session& session);

using FrameSink = std::function<void(const FrameOutput& frame, const Session& session)>;

// Emits frames 0..frames-1; frame f is the state after f steps.
void run_script(const SceneBundle& bundle, const GestureScript& script, std::uint64_t frames, const FrameSink& sink,
                const SessionOptions& options = {});

}  // namespace gsverse
