#include <set>

#include "gsverse/bundle.hpp"
#include "gsverse/error.hpp"

namespace gsverse {
namespace {

constexpr std::uint16_t kBundleVersion = 1;

constexpr std::uint32_t tag(const char (&s)[5]) {
  return std::uint32_t(std::uint8_t(s[0])) | std::uint32_t(std::uint8_t(s[1])) << 8 |
         std::uint32_t(std::uint8_t(s[2])) << 16 | std::uint32_t(std::uint8_t(s[3])) << 24;
}
constexpr std::uint32_t kMesh = tag("MESH");
constexpr std::uint32_t kAnch = tag("ANCH");
constexpr std::uint32_t kAppr = tag("APPR");
constexpr std::uint32_t kStat = tag("STAT");
constexpr std::uint32_t kMeta = tag("META");

template <typename Fn>
void write_section(ByteWriter& out, std::uint32_t section, Fn&& body) {
  out.put(section);
  const std::size_t len_at = out.size();
  out.put(std::uint64_t{0});
  const std::size_t start = out.size();
  body(out);
  out.patch(len_at, static_cast<std::uint64_t>(out.size() - start));
}

void write_vec3s(ByteWriter& out, const std::vector<Eigen::Vector3f>& v) {
  out.put(static_cast<std::uint32_t>(v.size()));
  for (const auto& p : v) out.put_array<float>(std::span<const float>(p.data(), 3));
}

std::vector<Eigen::Vector3f> read_vec3s(ByteReader& in) {
  const auto n = in.get<std::uint32_t>();
  const auto flat = in.get_vector<float>(std::size_t(n) * 3);
  std::vector<Eigen::Vector3f> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = Eigen::Vector3f(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  return out;
}

void write_mesh(ByteWriter& out, const BoundObject& obj) {
  write_vec3s(out, obj.mesh.vertices);
  out.put(static_cast<std::uint32_t>(obj.mesh.faces.size()));
  for (const auto& f : obj.mesh.faces) out.put_array<std::uint32_t>(f);
  out.put(static_cast<std::uint8_t>(obj.mesh.labels ? 1 : 0));
  if (obj.mesh.labels) out.put_array<std::int32_t>(*obj.mesh.labels);
  write_vec3s(out, obj.rest_vertices);
}

void read_mesh(ByteReader& in, BoundObject& obj) {
  obj.mesh.vertices = read_vec3s(in);
  const auto nf = in.get<std::uint32_t>();
  const auto flat = in.get_vector<std::uint32_t>(std::size_t(nf) * 3);
  obj.mesh.faces.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) obj.mesh.faces[f] = {flat[3 * f], flat[3 * f + 1], flat[3 * f + 2]};
  const auto has_labels = in.get<std::uint8_t>();
  if (has_labels) obj.mesh.labels = in.get_vector<std::int32_t>(obj.mesh.vertices.size());
  obj.rest_vertices = read_vec3s(in);
}

void write_cloud(ByteWriter& out, const GaussianCloud& c) {
  out.put(static_cast<std::uint32_t>(c.count));
  out.put(static_cast<std::uint8_t>(c.sh_degree));
  out.put_array<float>(c.means);
  out.put_array<float>(c.log_scales);
  out.put_array<float>(c.rotations);
  out.put_array<float>(c.opacity_logits);
  out.put_array<float>(c.sh_coeffs);
}

GaussianCloud read_cloud(ByteReader& in) {
  GaussianCloud c;
  c.count = in.get<std::uint32_t>();
  c.sh_degree = in.get<std::uint8_t>();
  if (c.sh_degree > 3) throw Error(ErrorCode::SectionTruncated, "STAT: sh_degree out of range");
  c.means = in.get_vector<float>(3 * c.count);
  c.log_scales = in.get_vector<float>(3 * c.count);
  c.rotations = in.get_vector<float>(4 * c.count);
  c.opacity_logits = in.get_vector<float>(c.count);
  c.sh_coeffs = in.get_vector<float>(c.sh_stride() * c.count);
  return c;
}

nlohmann::json vec_json(const std::array<double, 3>& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

std::array<double, 3> json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidArgument, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string_view body_name(BodyKind k) {
  switch (k) {
    case BodyKind::Soft: return "soft";
    case BodyKind::Rigid: return "rigid";
    case BodyKind::Static: return "static";
  }
  return "soft";
}

BodyKind parse_body(const std::string& s) {
  if (s == "soft") return BodyKind::Soft;
  if (s == "rigid") return BodyKind::Rigid;
  if (s == "static") return BodyKind::Static;
  throw Error(ErrorCode::InvalidArgument, "unknown body kind '" + s + "'");
}

}  // namespace

void write_anchors(ByteWriter& out, std::span<const AnchoredGaussian> anchors) {
  out.put(static_cast<std::uint32_t>(anchors.size()));
  for (const auto& a : anchors) {
    out.put(a.face_id);
    out.put_array<float>(a.alpha);
    out.put(a.rho);
    out.put(a.appearance_id);
  }
}

std::vector<AnchoredGaussian> read_anchors(ByteReader& in) {
  const auto n = in.get<std::uint32_t>();
  constexpr std::size_t kAnchorBytes = 4 + 12 + 4 + 4;
  if (n > in.remaining() / kAnchorBytes) in.get_raw(std::size_t(n) * kAnchorBytes);  // throws
  std::vector<AnchoredGaussian> anchors(n);
  for (auto& a : anchors) {
    a.face_id = in.get<std::uint32_t>();
    in.get_array<float>(a.alpha);
    a.rho = in.get<float>();
    a.appearance_id = in.get<std::uint32_t>();
  }
  return anchors;
}

void write_appearance(ByteWriter& out, const AppearanceTable& table) {
  const std::size_t stride = table.sh_stride();
  out.put(static_cast<std::uint32_t>(table.size()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    out.put(table.opacity_logits[i]);
    out.put(static_cast<std::uint8_t>(table.sh_degree));
    out.put_array<float>(std::span<const float>(table.sh_coeffs).subspan(i * stride, stride));
  }
}

AppearanceTable read_appearance(ByteReader& in) {
  AppearanceTable table;
  const auto n = in.get<std::uint32_t>();
  if (n > in.remaining() / 5) in.get_raw(std::size_t(n) * 5);  // throws
  table.opacity_logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    table.opacity_logits[i] = in.get<float>();
    const int degree = in.get<std::uint8_t>();
    if (degree > 3) throw Error(ErrorCode::MalformedMessage, "appearance SH degree out of range");
    if (i == 0) {
      table.sh_degree = degree;
      table.sh_coeffs.reserve(std::size_t(n) * table.sh_stride());
    } else if (degree != table.sh_degree) {
      throw Error(ErrorCode::MalformedMessage, "mixed SH degrees within one appearance table");
    }
    const auto coeffs = in.get_vector<float>(table.sh_stride());
    table.sh_coeffs.insert(table.sh_coeffs.end(), coeffs.begin(), coeffs.end());
  }
  return table;
}

std::size_t SceneBundle::add_object(BoundObject object, ObjectSettings settings) {
  objects.push_back(std::move(object));
  meta.objects.push_back(std::move(settings));
  return objects.size() - 1;
}

std::size_t SceneBundle::object_index(std::string_view name) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].name == name) return i;
  }
  throw Error(ErrorCode::UnknownObject, "no object named '" + std::string(name) + "'");
}

void SceneBundle::validate() const {
  std::set<std::string> names;
  for (const auto& obj : objects) {
    if (!names.insert(obj.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate object name '" + obj.name + "'");
    }
    obj.validate();
  }
  if (meta.objects.size() != objects.size()) {
    throw Error(ErrorCode::InvalidArgument, "object settings count differs from object count");
  }
  static_cloud.validate();
}

nlohmann::json meta_to_json(const SceneMeta& meta, const std::vector<BoundObject>& objects) {
  nlohmann::json j;
  j["name"] = meta.name;
  j["units_per_meter"] = meta.units_per_meter;
  j["gravity"] = vec_json(meta.gravity);
  j["solver"] = {{"dt", meta.solver.dt},
                 {"substeps", meta.solver.substeps},
                 {"iterations", meta.solver.iterations},
                 {"damping", meta.solver.damping}};
  if (meta.ground) {
    j["ground"] = {{"normal", vec_json(meta.ground->normal)},
                   {"offset", meta.ground->offset},
                   {"restitution", meta.ground->restitution},
                   {"friction", meta.ground->friction}};
  } else {
    j["ground"] = nullptr;
  }
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < meta.objects.size(); ++i) {
    const auto& s = meta.objects[i];
    nlohmann::json o = {{"name", i < objects.size() ? objects[i].name : std::string()},
                        {"body", body_name(s.body)},
                        {"density", s.density},
                        {"compliance", s.compliance},
                        {"pinned", s.pinned},
                        {"restitution", s.restitution},
                        {"friction", s.friction}};
    o["volume_compliance"] = s.volume_compliance ? nlohmann::json(*s.volume_compliance) : nlohmann::json();
    arr.push_back(std::move(o));
  }
  j["objects"] = std::move(arr);
  return j;
}

SceneMeta meta_from_json(const nlohmann::json& j, std::vector<std::string>* names) {
  SceneMeta meta;
  try {
    meta.name = j.value("name", meta.name);
    meta.units_per_meter = j.value("units_per_meter", meta.units_per_meter);
    if (j.contains("gravity")) meta.gravity = json_vec(j["gravity"]);
    if (j.contains("solver")) {
      const auto& s = j["solver"];
      meta.solver.dt = s.value("dt", meta.solver.dt);
      meta.solver.substeps = s.value("substeps", meta.solver.substeps);
      meta.solver.iterations = s.value("iterations", meta.solver.iterations);
      meta.solver.damping = s.value("damping", meta.solver.damping);
    }
    if (j.contains("ground") && !j["ground"].is_null()) {
      const auto& g = j["ground"];
      GroundSettings ground;
      if (g.contains("normal")) ground.normal = json_vec(g["normal"]);
      ground.offset = g.value("offset", ground.offset);
      ground.restitution = g.value("restitution", ground.restitution);
      ground.friction = g.value("friction", ground.friction);
      meta.ground = ground;
    }
    if (j.contains("objects")) {
      for (const auto& o : j["objects"]) {
        ObjectSettings s;
        s.body = parse_body(o.value("body", std::string("soft")));
        s.density = o.value("density", s.density);
        s.compliance = o.value("compliance", s.compliance);
        if (o.contains("volume_compliance") && !o["volume_compliance"].is_null()) {
          s.volume_compliance = o["volume_compliance"].get<double>();
        }
        if (o.contains("pinned")) s.pinned = o["pinned"].get<std::vector<std::uint32_t>>();
        s.restitution = o.value("restitution", s.restitution);
        s.friction = o.value("friction", s.friction);
        meta.objects.push_back(std::move(s));
        if (names) names->push_back(o.value("name", std::string()));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("scene metadata: ") + e.what());
  }
  return meta;
}

Bytes save_bundle(const SceneBundle& bundle) {
  bundle.validate();
  ByteWriter out;
  out.put_raw(std::string_view("GSV1"));
  out.put(kBundleVersion);
  out.put(std::uint16_t{0});
  write_section(out, kMeta, [&](ByteWriter& w) { w.put_raw(meta_to_json(bundle.meta, bundle.objects).dump()); });
  write_section(out, kStat, [&](ByteWriter& w) { write_cloud(w, bundle.static_cloud); });
  for (const auto& obj : bundle.objects) {
    write_section(out, kMesh, [&](ByteWriter& w) { write_mesh(w, obj); });
    write_section(out, kAnch, [&](ByteWriter& w) { write_anchors(w, obj.anchors); });
    write_section(out, kAppr, [&](ByteWriter& w) { write_appearance(w, obj.appearance); });
  }
  return out.take();
}

SceneBundle load_bundle(ByteView bytes) {
  if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "GSV1") {
    throw Error(ErrorCode::BadMagic, "not a .gsv bundle");
  }
  ByteReader in(bytes.subspan(4), ErrorCode::SectionTruncated);
  const auto version = in.get<std::uint16_t>();
  if (version != kBundleVersion) {
    throw Error(ErrorCode::VersionMismatch, "bundle version " + std::to_string(version));
  }
  in.get<std::uint16_t>();  // flags

  SceneBundle bundle;
  std::vector<std::string> names;
  bool have_meta = false;
  while (!in.at_end()) {
    const auto section = in.get<std::uint32_t>();
    const auto length = in.get<std::uint64_t>();
    if (length > in.remaining()) {
      throw Error(ErrorCode::SectionTruncated, "section length " + std::to_string(length) + " exceeds file");
    }
    ByteReader payload(in.get_raw(static_cast<std::size_t>(length)), ErrorCode::SectionTruncated);
    if (section == kMeta) {
      const auto text = payload.get_string(payload.remaining());
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SectionTruncated, std::string("META is not valid JSON: ") + e.what());
      }
      bundle.meta = meta_from_json(j, &names);
      have_meta = true;
    } else if (section == kStat) {
      bundle.static_cloud = read_cloud(payload);
    } else if (section == kMesh) {
      bundle.objects.emplace_back();
      read_mesh(payload, bundle.objects.back());
    } else if (section == kAnch || section == kAppr) {
      if (bundle.objects.empty()) throw Error(ErrorCode::SectionTruncated, "anchor data before any MESH");
      auto& obj = bundle.objects.back();
      if (section == kAnch) obj.anchors = read_anchors(payload);
      else obj.appearance = read_appearance(payload);
    } else {
      continue;  // unknown sections are skipped
    }
    if (!payload.at_end()) throw Error(ErrorCode::SectionTruncated, "section has trailing bytes");
  }
  if (!have_meta) throw Error(ErrorCode::SectionTruncated, "bundle has no META section");
  if (names.size() != bundle.objects.size()) {
    throw Error(ErrorCode::SectionTruncated, "META lists " + std::to_string(names.size()) +
                                                 " objects but bundle has " +
                                                 std::to_string(bundle.objects.size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) bundle.objects[i].name = names[i];
  bundle.validate();
  return bundle;
}

}  // namespace gsverse
