#include <algorithm>
#include <cctype>
#include <array>
#include <cmath>
#include <limits>
#include <set>

#include "gsverse/error.hpp"
#include "gsverse/session.hpp"

namespace gsverse {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kMacroNames = {"STRETCH", "TWIST", "SHAKE", "CRUSH", "INFLATE", "TIP"};

std::uint32_t object_from_json(const json& j, const SceneBundle* bundle) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v < 0) throw Error(ErrorCode::UnknownObject, "negative object index");
    return static_cast<std::uint32_t>(v);
  }
  if (j.is_string()) {
    if (!bundle) throw Error(ErrorCode::InvalidArgument, "object names need a scene to resolve");
    return static_cast<std::uint32_t>(bundle->object_index(j.get<std::string>()));
  }
  throw Error(ErrorCode::InvalidArgument, "object must be an index or a name");
}

json object_to_json(std::uint32_t object, const SceneBundle* bundle) {
  if (bundle && object < bundle->objects.size()) return bundle->objects[object].name;
  return object;
}

Eigen::Vector3d vec3_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidArgument, std::string(what) + " needs 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

struct ToJson {
  const SceneBundle* bundle;
  json& out;

  void operator()(const GrabAction& a) {
    out["type"] = "grab";
    out["object"] = object_to_json(a.object, bundle);
    out["face"] = a.face;
    out["bary"] = vec3_to_json(a.bary);
    out["stiffness"] = a.stiffness;
    if (a.grab_id) out["grab_id"] = *a.grab_id;
    if (a.target) out["target"] = vec3_to_json(*a.target);
  }
  void operator()(const MoveTargetAction& a) {
    out["type"] = "move_target";
    out["grab_id"] = a.grab_id;
    out["target"] = vec3_to_json(a.target);
  }
  void operator()(const ReleaseAction& a) {
    out["type"] = "release";
    out["grab_id"] = a.grab_id;
  }
  void operator()(const PressureAction& a) {
    out["type"] = "pressure";
    out["object"] = object_to_json(a.object, bundle);
    out["faces"] = a.faces;
    out["magnitude"] = a.magnitude;
    if (a.volume_compliance) out["volume_compliance"] = *a.volume_compliance;
  }
  void operator()(const MacroAction& a) {
    out["type"] = "macro";
    out["kind"] = std::string(to_string(a.kind));
    out["object"] = object_to_json(a.object, bundle);
    out["params"] = a.params;
  }
};

}  // namespace

std::string_view to_string(MacroKind kind) {
  const auto i = static_cast<std::size_t>(kind);
  return i >= 1 && i <= kMacroNames.size() ? kMacroNames[i - 1] : "UNKNOWN";
}

// Case-insensitive.
std::optional<MacroKind> macro_kind_from_string(std::string_view name) {
  const auto same = [](std::string_view a, std::string_view b) {
    return std::ranges::equal(a, b, [](char x, char y) { return std::toupper((unsigned char)x) == std::toupper((unsigned char)y); });
  };
  for (std::size_t i = 0; i < kMacroNames.size(); ++i) {
    if (same(kMacroNames[i], name)) return static_cast<MacroKind>(i + 1);
  }
  return std::nullopt;
}

std::optional<MacroKind> macro_kind_from_code(std::uint8_t code) {
  if (code >= 1 && code <= kMacroNames.size()) return static_cast<MacroKind>(code);
  return std::nullopt;
}

GestureScript script_from_json(const json& j, const SceneBundle* bundle) {
  const json& events = j.is_array() ? j : j.at("events");
  GestureScript script;
  try {
    for (const auto& e : events) {
      GestureEvent ev;
      ev.t = e.value("t", 0.0);
      const std::string type = e.at("type").get<std::string>();
      if (type == "grab") {
        GrabAction a;
        a.object = object_from_json(e.at("object"), bundle);
        a.face = e.at("face").get<std::uint32_t>();
        if (e.contains("bary")) a.bary = vec3_from_json(e["bary"], "bary");
        a.stiffness = e.value("stiffness", 1.0);
        if (e.contains("grab_id")) a.grab_id = e["grab_id"].get<std::uint32_t>();
        if (e.contains("target")) a.target = vec3_from_json(e["target"], "target");
        ev.action = a;
      } else if (type == "move_target") {
        ev.action = MoveTargetAction{e.at("grab_id").get<std::uint32_t>(), vec3_from_json(e.at("target"), "target")};
      } else if (type == "release") {
        ev.action = ReleaseAction{e.at("grab_id").get<std::uint32_t>()};
      } else if (type == "pressure") {
        PressureAction a;
        a.object = object_from_json(e.at("object"), bundle);
        if (e.contains("faces")) a.faces = e["faces"].get<std::vector<std::uint32_t>>();
        a.magnitude = e.at("magnitude").get<double>();
        if (e.contains("volume_compliance")) a.volume_compliance = e["volume_compliance"].get<double>();
        ev.action = std::move(a);
      } else if (type == "macro") {
        MacroAction a;
        const auto kind = macro_kind_from_string(e.at("kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown macro kind " + e["kind"].dump());
        a.kind = *kind;
        a.object = object_from_json(e.at("object"), bundle);
        const auto params = e.value("params", std::vector<float>{});
        if (params.size() > 4) throw Error(ErrorCode::InvalidArgument, "macro takes at most 4 params");
        std::copy(params.begin(), params.end(), a.params.begin());
        ev.action = a;
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown event type '" + type + "'");
      }
      script.events.push_back(std::move(ev));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("script: ") + ex.what());
  }
  return script;
}

json script_to_json(const GestureScript& script, const SceneBundle* bundle) {
  json events = json::array();
  for (const auto& ev : script.events) {
    json e;
    e["t"] = ev.t;
    std::visit(ToJson{bundle, e}, ev.action);
    events.push_back(std::move(e));
  }
  return json{{"events", std::move(events)}};
}

void GestureScript::validate(const SceneBundle& bundle) const {
  double last = -std::numeric_limits<double>::infinity();
  std::set<std::uint32_t> live;
  std::uint32_t next_id = 0;
  auto check_object = [&](std::uint32_t object) {
    if (object >= bundle.objects.size()) {
      throw Error(ErrorCode::UnknownObject, "object " + std::to_string(object) + " not in scene");
    }
    return object;
  };
  auto check_live = [&](std::uint32_t id) {
    if (id < kMacroGrabBase && !live.contains(id)) {
      throw Error(ErrorCode::InvalidArgument, "grab " + std::to_string(id) + " is not active");
    }
  };
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (!std::isfinite(ev.t) || ev.t < last) {
      throw Error(ErrorCode::InvalidArgument, "event " + std::to_string(i) + " is out of time order");
    }
    last = ev.t;
    if (const auto* g = std::get_if<GrabAction>(&ev.action)) {
      const auto& mesh = bundle.objects[check_object(g->object)].mesh;
      if (g->face >= mesh.faces.size()) throw Error(ErrorCode::InvalidFace, "face " + std::to_string(g->face));
      if (!g->bary.allFinite() || g->bary.minCoeff() < 0.0 || !(g->bary.sum() > 0.0)) throw Error(ErrorCode::InvalidArgument, "bad bary");
      const std::uint32_t id = g->grab_id.value_or(next_id);
      if (live.contains(id)) throw Error(ErrorCode::InvalidArgument, "grab " + std::to_string(id) + " already active");
      if (id < kMacroGrabBase) next_id = std::max(next_id, id + 1);
      live.insert(id);
    } else if (const auto* m = std::get_if<MoveTargetAction>(&ev.action)) {
      check_live(m->grab_id);
    } else if (const auto* r = std::get_if<ReleaseAction>(&ev.action)) {
      check_live(r->grab_id);
      live.erase(r->grab_id);
    } else if (const auto* p = std::get_if<PressureAction>(&ev.action)) {
      const auto& mesh = bundle.objects[check_object(p->object)].mesh;
      for (auto f : p->faces) {
        if (f >= mesh.faces.size()) throw Error(ErrorCode::InvalidFace, "face " + std::to_string(f));
      }
    } else if (const auto* mac = std::get_if<MacroAction>(&ev.action)) {
      check_object(mac->object);
    }
  }
}

}  // namespace gsverse
