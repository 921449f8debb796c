#include "gsverse/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsverse/error.hpp"
#include "gsverse/meshparam.hpp"
#include "gsverse/primitives.hpp"
#include "gsverse/propagate.hpp"
#include "gsverse/protocol.hpp"
#include "gsverse/reference.hpp"
#include "gsverse/render.hpp"
#include "gsverse/server.hpp"
#include "gsverse/session.hpp"

namespace gsverse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

Bytes read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path& path) {
  const Bytes b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

void write_bytes(const fs::path& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

SceneBundle load_scene(const fs::path& path) {
  try {
    return load_bundle(read_bytes(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

TriMesh load_mesh(const fs::path& path, std::size_t* dropped) {
  if (path.extension() != ".obj") throw Error(ErrorCode::UnsupportedFormat, path.string() + ": meshes must be OBJ");
  auto result = load_obj(read_text(path));
  if (dropped) *dropped += result.dropped_faces;
  return std::move(result.mesh);
}

std::optional<Regions> load_regions(const fs::path& path) {
  const std::string text = read_text(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return std::nullopt;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
  if (j.contains("labels")) return LabelMap{j["labels"].get<std::vector<std::int32_t>>()};
  const json boxes = j.is_array() ? j : j.value("boxes", json::array());
  if (boxes.empty()) return std::nullopt;
  std::vector<Aabb> out;
  for (const auto& b : boxes) {
    const auto lo = b.at("min").get<std::array<float, 3>>();
    const auto hi = b.at("max").get<std::array<float, 3>>();
    out.push_back({Eigen::Vector3f(lo[0], lo[1], lo[2]), Eigen::Vector3f(hi[0], hi[1], hi[2])});
  }
  return out;
}

BodyKind parse_body(const std::string& s) {
  if (s == "soft") return BodyKind::Soft;
  if (s == "rigid") return BodyKind::Rigid;
  if (s == "static") return BodyKind::Static;
  throw Error(ErrorCode::InvalidArgument, "body must be soft, rigid or static");
}

// Settings a config file may override, merged under command-line flags.
void merge_config(SceneBundle& bundle, const std::string& config_path) {
  if (config_path.empty()) return;
  json meta = meta_to_json(bundle.meta, bundle.objects);
  meta.merge_patch(read_json(config_path));
  bundle.meta = meta_from_json(meta);
}

void check_solver(const SolverSettings& s) {
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (s.substeps < 1) throw Error(ErrorCode::InvalidArgument, "substeps must be at least 1");
  if (s.iterations < 1) throw Error(ErrorCode::InvalidArgument, "iterations must be at least 1");
  if (!(s.damping > 0.0 && s.damping <= 1.0)) throw Error(ErrorCode::InvalidArgument, "damping must be in (0,1]");
}

void append_widened(GaussianCloud& dst, const GaussianCloud& src) {
  if (src.count == 0) return;
  if (dst.count == 0 && dst.sh_degree < src.sh_degree) dst.sh_degree = src.sh_degree;
  const int degree = std::max(dst.sh_degree, src.sh_degree);
  auto widen = [degree](const GaussianCloud& c) {
    if (c.sh_degree == degree) return c;
    GaussianCloud w = c;
    w.sh_degree = degree;
    const std::size_t from = sh_coeffs_per_channel(c.sh_degree), to = sh_coeffs_per_channel(degree);
    w.sh_coeffs.assign(3 * to * c.count, 0.0f);
    for (std::size_t i = 0; i < c.count; ++i) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        for (std::size_t k = 0; k < from; ++k) w.sh_coeffs[(3 * i + ch) * to + k] = c.sh_coeffs[(3 * i + ch) * from + k];
      }
    }
    return w;
  };
  if (dst.sh_degree != degree) dst = widen(dst);
  const GaussianCloud s = widen(src);
  for (std::size_t i = 0; i < s.count; ++i) dst.push_from(s, i);
}

GaussianCloud materialize_frame(const SceneBundle& bundle, const FrameOutput& frame) {
  GaussianCloud cloud = bundle.static_cloud;
  for (std::size_t i = 0; i < bundle.objects.size(); ++i) append_widened(cloud, to_cloud(bundle.objects[i], frame.splats[i]));
  return cloud;
}

std::string frame_name(std::uint64_t f, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06llu.%s", static_cast<unsigned long long>(f), ext);
  return buf;
}

// Client conformance data per frame and object: the wire VerticesFrame, and
// the engine's splats as float32 records mean(3) | cov xx,xy,xz,yy,yz,zz.
void write_fixture_frame(const fs::path& dir, const FrameOutput& frame) {
  for (std::uint32_t i = 0; i < frame.vertices.size(); ++i) {
    const std::string stem = "object" + std::to_string(i) + "_";
    write_bytes(dir / (stem + frame_name(frame.frame_index, "vertices.bin")),
                protocol::encode(protocol::VerticesFrame{frame.frame_index, frame.sim_time, i, frame.vertices[i]}));
    const PropagationOutput& s = frame.splats[i];
    ByteWriter w;
    for (std::size_t k = 0; k < s.count; ++k) {
      for (int c = 0; c < 3; ++c) w.put(s.means[3 * k + c]);
      const Eigen::Matrix3d cov = s.covariance(k);
      for (const auto& [r, c] : {std::pair{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}) w.put(float(cov(r, c)));
    }
    write_bytes(dir / (stem + frame_name(frame.frame_index, "splats.bin")), w.bytes());
  }
}

Eigen::Vector3d background_of(const std::vector<double>& v) {
  if (v.empty()) return Eigen::Vector3d::Zero();
  if (v.size() != 3) throw Error(ErrorCode::InvalidArgument, "background needs 3 values");
  return {v[0], v[1], v[2]};
}

// ---- commands -----------------------------------------------------------------

struct BindArgs {
  std::vector<std::string> meshes;
  std::string splats, regions, out, config, body = "soft";
  unsigned threads = 1;
};

int cmd_bind(const BindArgs& a, std::ostream& out) {
  const GaussianCloud cloud = load_gaussian_ply(read_bytes(a.splats));
  std::optional<Regions> regions;
  if (!a.regions.empty()) regions = load_regions(a.regions);

  SceneBundle bundle;
  std::vector<GaussianCloud> parts;
  if (regions) {
    SegmentResult seg = segment_split(cloud, *regions);
    bundle.static_cloud = std::move(seg.static_cloud);
    parts = std::move(seg.objects);
  } else {
    bundle.static_cloud.sh_degree = cloud.sh_degree;
    parts.push_back(cloud);
  }
  if (a.meshes.size() != parts.size()) {
    throw Error(ErrorCode::InvalidArgument, std::to_string(parts.size()) + " objects need as many --mesh files, got " +
                                                std::to_string(a.meshes.size()));
  }
  std::size_t dropped = 0, anchors = 0;
  double sq_sum = 0.0;
  ObjectSettings settings;
  settings.body = parse_body(a.body);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const TriMesh mesh = load_mesh(a.meshes[i], &dropped);
    std::string name = fs::path(a.meshes[i]).stem().string();
    for (const auto& o : bundle.objects) {
      if (o.name == name) name += "_" + std::to_string(i);
    }
    BindReport report;
    BoundObject obj = bind_cloud(parts[i], mesh, {a.threads, name}, &report);
    anchors += obj.anchors.size();
    sq_sum += report.rms_distance * report.rms_distance * double(obj.anchors.size());
    bundle.add_object(std::move(obj), settings);
  }
  merge_config(bundle, a.config);
  bundle.validate();
  write_bytes(a.out, save_bundle(bundle));
  out << "anchors: " << anchors << "\n"
      << "dropped_faces: " << dropped << "\n"
      << "rms_distance: " << (anchors ? std::sqrt(sq_sum / double(anchors)) : 0.0) << "\n";
  return kExitOk;
}

struct SimulateArgs {
  std::string scene, script, out, camera, config, fixture;
  std::uint64_t frames = 0;
  std::optional<double> dt;
  std::optional<int> substeps, iterations;
  unsigned threads = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SceneBundle bundle = load_scene(a.scene);
  merge_config(bundle, a.config);
  if (a.dt) bundle.meta.solver.dt = *a.dt;
  if (a.substeps) bundle.meta.solver.substeps = *a.substeps;
  if (a.iterations) bundle.meta.solver.iterations = *a.iterations;
  check_solver(bundle.meta.solver);
  GestureScript script;
  if (!a.script.empty()) script = script_from_json(read_json(a.script), &bundle);
  script.validate(bundle);
  std::optional<Camera> camera;
  if (!a.camera.empty()) {
    camera = camera_from_json(read_json(a.camera));
    camera->validate();
  }
  if (a.frames == 0) {
    out << "frames: 0\n";
    return kExitOk;
  }
  fs::create_directories(a.out);
  if (!a.fixture.empty()) {
    fs::create_directories(a.fixture);
    write_bytes(fs::path(a.fixture) / "init.bin", protocol::encode(protocol::make_init(bundle)));
  }
  std::optional<FrameStats> stats;
  run_script(
      bundle, script, a.frames,
      [&](const FrameOutput& frame, const Session& session) {
        const GaussianCloud cloud = materialize_frame(bundle, frame);
        write_bytes(fs::path(a.out) / frame_name(frame.frame_index, "ply"), save_gaussian_ply(cloud));
        if (camera) {
          RenderOptions ro;
          ro.threads = a.threads;
          write_png(render(cloud, *camera, ro), fs::path(a.out) / frame_name(frame.frame_index, "png"));
        }
        if (!a.fixture.empty()) write_fixture_frame(a.fixture, frame);
        stats = session.frame_stats();
      },
      {a.threads, true});
  out << "frames: " << a.frames << "\n"
      << "mean_ms: " << stats->mean_ms << "\n"
      << "p50_ms: " << stats->p50_ms << "\n"
      << "p99_ms: " << stats->p99_ms << "\n"
      << "splats_per_s: " << stats->splats_per_s << "\n";
  return kExitOk;
}

struct RenderArgs {
  std::string scene, camera, out, frame;
  bool verify = false;
  unsigned threads = 1;
  std::vector<double> background;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const SceneBundle bundle = load_scene(a.scene);
  const GaussianCloud cloud = a.frame.empty() ? materialize(bundle) : load_gaussian_ply(read_bytes(a.frame));
  const Camera camera = camera_from_json(read_json(a.camera));
  RenderOptions ro;
  ro.threads = a.threads;
  ro.background = background_of(a.background);
  const Image image = render(cloud, camera, ro);
  write_png(image, a.out);
  out << "splats: " << cloud.count << "\n";
  if (a.verify) {
    const double p = psnr(image, reference::render_naive(cloud, camera, ro.background));
    out << "psnr_db: " << (std::isinf(p) ? std::string("inf") : std::to_string(p)) << "\n";
  }
  return kExitOk;
}

struct ServeArgs {
  std::string scene, record, address = "0.0.0.0";
  int port = 8765;
  std::optional<std::uint64_t> frames;
  unsigned threads = 1;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  if (a.port < 0 || a.port > 65535) throw Error(ErrorCode::BindFailure, "port " + std::to_string(a.port) + " out of range");
  const SceneBundle bundle = load_scene(a.scene);
  ServeOptions so;
  so.address = a.address;
  so.port = static_cast<std::uint16_t>(a.port);
  if (!a.record.empty()) so.record = a.record;
  so.max_frames = a.frames;
  so.stop = &g_stop;
  so.session.threads = a.threads;
  so.on_listening = [&out](std::uint16_t port) { out << "listening on port " << port << std::endl; };
  g_stop.store(false);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const ServeReport report = serve(bundle, so);
  out << "frames: " << report.frames << "\nclients: " << report.clients << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string scene, out;
  std::vector<unsigned> threads{1};
  std::uint64_t frames = 100;
  bool include_step = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const SceneBundle bundle = load_scene(a.scene);
  if (a.frames == 0) throw Error(ErrorCode::InvalidArgument, "bench needs at least one frame");
  std::ostringstream csv;
  csv << "threads,frames,mean_ms,p50_ms,p99_ms,splats_per_s\n";
  std::size_t anchors = 0;
  for (const auto& o : bundle.objects) anchors += o.anchors.size();
  for (unsigned t : a.threads) {
    if (t == 0) throw Error(ErrorCode::InvalidArgument, "thread counts must be positive");
    Session session(bundle, {t, false});
    std::vector<PropagationOutput> outputs(bundle.objects.size());
    FrameTimeHistogram hist;
    using Clock = std::chrono::steady_clock;
    for (std::uint64_t f = 0; f < a.frames; ++f) {
      double step_ms = 0.0;
      if (f > 0) {
        const auto s0 = Clock::now();
        session.advance();
        step_ms = std::chrono::duration<double, std::milli>(Clock::now() - s0).count();
      }
      std::vector<std::vector<Eigen::Vector3f>> verts;
      for (std::size_t i = 0; i < bundle.objects.size(); ++i) verts.push_back(session.object_vertices(i));
      const auto p0 = Clock::now();
      for (std::size_t i = 0; i < bundle.objects.size(); ++i) {
        propagate_into(bundle.objects[i], verts[i], outputs[i], {t});
      }
      const double prop_ms = std::chrono::duration<double, std::milli>(Clock::now() - p0).count();
      hist.record(prop_ms + (a.include_step ? step_ms : 0.0));
    }
    const FrameStats s = hist.summary(anchors);
    csv << t << ',' << a.frames << ',' << std::setprecision(9) << s.mean_ms << ',' << s.p50_ms << ',' << s.p99_ms
        << ',' << s.splats_per_s << "\n";
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream f(a.out);
    f << csv.str();
    if (!f) throw Error(ErrorCode::Io, "cannot write " + a.out);
  }
  return kExitOk;
}

struct DemoArgs {
  std::string out, shape = "sphere", body = "soft";
  int subdivisions = 3, segments = 32, rings = 16;
  double radius = 0.5, height = 2.0;
  std::uint32_t anchors_per_face = 4;
  bool zero_gravity = false, ground = false;
  std::optional<double> volume_compliance;
};

int cmd_demo_scene(const DemoArgs& a, std::uint64_t seed, std::ostream& out) {
  TriMesh mesh;
  if (a.shape == "sphere") {
    mesh = make_icosphere(a.subdivisions, float(a.radius));
  } else if (a.shape == "cylinder") {
    mesh = make_cylinder(float(a.radius), float(a.height), a.segments, a.rings);
  } else if (a.shape == "box") {
    mesh = make_box(Eigen::Vector3f::Constant(float(a.radius)));
  } else {
    throw Error(ErrorCode::InvalidArgument, "shape must be sphere, cylinder or box");
  }
  BoundObject obj = place_uniform(mesh, a.anchors_per_face, seed, a.shape);
  // Tint by position so renders show the deformation.
  for (std::size_t k = 0; k < obj.anchors.size(); ++k) {
    const auto& an = obj.anchors[k];
    const auto& tri = mesh.faces[an.face_id];
    Eigen::Vector3f p = Eigen::Vector3f::Zero();
    for (int c = 0; c < 3; ++c) p += an.alpha[c] * mesh.vertices[tri[c]];
    const std::size_t stride = obj.appearance.sh_stride();
    for (int ch = 0; ch < 3; ++ch) {
      obj.appearance.sh_coeffs[an.appearance_id * stride + ch * (stride / 3)] =
          std::tanh(p[ch] / float(std::max(a.radius, a.height))) / kShC0 * 0.4f;
    }
    obj.appearance.opacity_logits[an.appearance_id] = 2.0f;
  }
  SceneBundle bundle;
  ObjectSettings settings;
  settings.body = parse_body(a.body);
  settings.volume_compliance = a.volume_compliance;
  bundle.add_object(std::move(obj), settings);
  bundle.meta.name = "demo-" + a.shape;
  if (a.zero_gravity) bundle.meta.gravity = {0.0, 0.0, 0.0};
  if (a.ground) {
    GroundSettings g;
    g.offset = a.shape == "cylinder" ? -0.01 : -a.radius - 0.01;
    bundle.meta.ground = g;
  }
  write_bytes(a.out, save_bundle(bundle));
  out << "vertices: " << mesh.vertices.size() << "\nfaces: " << mesh.faces.size()
      << "\nanchors: " << bundle.objects[0].anchors.size() << "\n";
  return kExitOk;
}

// One deterministic sample frame per message type.
int cmd_protocol_fixtures(const std::string& dir, std::uint64_t seed, std::ostream& out) {
  fs::create_directories(dir);
  SceneBundle bundle;
  bundle.add_object(place_uniform(make_box(Eigen::Vector3f::Constant(0.5f)), 1, seed, "box"));
  const protocol::Init init = protocol::make_init(bundle);
  const std::vector<std::pair<std::string, protocol::Message>> fixtures = {
      {"1_init", init},
      {"2_vertices_frame", protocol::VerticesFrame{3, 3.0 / 90.0, 0, init.objects[0].rest_vertices}},
      {"3_grab_input", protocol::GrabInput{0, 2, {0.2f, 0.3f, 0.5f}, {0.1f, -0.2f, 0.7f}, 0.8f}},
      {"4_move_target", protocol::MoveTarget{7, {1.0f, 2.0f, 3.0f}}},
      {"5_release", protocol::Release{7}},
      {"6_grab_ack", protocol::GrabAck{7}},
      {"7_macro_input", protocol::MacroInput{1, 0, {1.5f, 0.5f, -1.0f, 1.0f}}},
      {"8_stats", protocol::Stats{1.25f, 1.0f, 3.5f, 2.0e6f}},
      {"9_error", protocol::ErrorFrame{2, "another client holds control"}},
  };
  for (const auto& [name, msg] : fixtures) {
    write_bytes(fs::path(dir) / (name + ".bin"), protocol::encode(msg));
    out << name << ".bin\n";
  }
  return kExitOk;
}

}  // namespace

GaussianCloud materialize(const SceneBundle& bundle) {
  std::vector<std::vector<Eigen::Vector3f>> rest;
  for (const auto& o : bundle.objects) rest.push_back(o.rest_vertices);
  return materialize(bundle, rest);
}

GaussianCloud materialize(const SceneBundle& bundle, const std::vector<std::vector<Eigen::Vector3f>>& vertices) {
  if (vertices.size() != bundle.objects.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one vertex array per object expected");
  }
  GaussianCloud cloud = bundle.static_cloud;
  for (std::size_t i = 0; i < bundle.objects.size(); ++i) {
    append_widened(cloud, propagate_to_cloud(bundle.objects[i], vertices[i]));
  }
  return cloud;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mesh-anchored Gaussian splat simulation, rendering and streaming"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  BindArgs bind;
  auto* c_bind = app.add_subcommand("bind", "Bind a splat cloud to meshes and write a scene bundle");
  c_bind->add_option("--mesh", bind.meshes, "OBJ mesh, one per object")->required();
  c_bind->add_option("--splats", bind.splats, "Gaussian splat PLY")->required();
  c_bind->add_option("--regions", bind.regions, "JSON boxes or labels splitting objects from the static scene");
  c_bind->add_option("--out", bind.out, "Output .gsv bundle")->required();
  c_bind->add_option("--body", bind.body, "soft, rigid or static")->capture_default_str();
  c_bind->add_option("--config", bind.config, "JSON scene settings merged into the bundle");
  c_bind->add_option("--threads", bind.threads)->capture_default_str();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a gesture script headless and write per-frame splats");
  c_sim->add_option("--scene", sim.scene)->required();
  c_sim->add_option("--script", sim.script, "Gesture script JSON (empty when omitted)");
  c_sim->add_option("--frames", sim.frames)->required();
  c_sim->add_option("--dt", sim.dt);
  c_sim->add_option("--substeps", sim.substeps);
  c_sim->add_option("--iters", sim.iterations);
  c_sim->add_option("--out", sim.out)->required();
  c_sim->add_option("--render", sim.camera, "Camera JSON; also writes a PNG per frame");
  c_sim->add_option("--config", sim.config);
  c_sim->add_option("--fixture", sim.fixture, "Directory for client conformance data (Init, frames, engine splats)");
  c_sim->add_option("--threads", sim.threads)->capture_default_str();

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "Render a scene or a frame PLY to PNG");
  c_ren->add_option("--scene", ren.scene)->required();
  c_ren->add_option("--camera", ren.camera)->required();
  c_ren->add_option("--out", ren.out)->required();
  c_ren->add_option("--frame", ren.frame, "Splat PLY rendered instead of the scene rest pose");
  c_ren->add_flag("--verify", ren.verify, "Report PSNR against the brute-force renderer");
  c_ren->add_option("--background", ren.background)->expected(3);
  c_ren->add_option("--threads", ren.threads)->capture_default_str();

  ServeArgs srv;
  auto* c_srv = app.add_subcommand("serve", "Stream the live simulation over websockets");
  c_srv->add_option("--scene", srv.scene)->required();
  c_srv->add_option("--port", srv.port)->capture_default_str();
  c_srv->add_option("--address", srv.address)->capture_default_str();
  c_srv->add_option("--record", srv.record, "Write the input trace as a gesture script on exit");
  c_srv->add_option("--frames", srv.frames, "Stop after this many frames");
  c_srv->add_option("--threads", srv.threads)->capture_default_str();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Time propagation per thread count as CSV");
  c_bench->add_option("--scene", bench.scene)->required();
  c_bench->add_option("--threads", bench.threads)->delimiter(',')->capture_default_str();
  c_bench->add_option("--frames", bench.frames)->capture_default_str();
  c_bench->add_option("--out", bench.out, "CSV path (stdout when omitted)");
  c_bench->add_flag("--include-step", bench.include_step, "Time step + propagate instead of propagate only");

  DemoArgs demo;
  auto* c_demo = app.add_subcommand("demo-scene", "Write a procedural scene bundle");
  c_demo->add_option("--out", demo.out)->required();
  c_demo->add_option("--shape", demo.shape, "sphere, cylinder or box")->capture_default_str();
  c_demo->add_option("--body", demo.body)->capture_default_str();
  c_demo->add_option("--subdivisions", demo.subdivisions)->capture_default_str();
  c_demo->add_option("--segments", demo.segments)->capture_default_str();
  c_demo->add_option("--rings", demo.rings)->capture_default_str();
  c_demo->add_option("--radius", demo.radius)->capture_default_str();
  c_demo->add_option("--height", demo.height)->capture_default_str();
  c_demo->add_option("--anchors-per-face", demo.anchors_per_face)->capture_default_str();
  c_demo->add_option("--volume-compliance", demo.volume_compliance);
  c_demo->add_flag("--zero-gravity", demo.zero_gravity);
  c_demo->add_flag("--ground", demo.ground);

  std::string fixtures_dir;
  auto* c_fix = app.add_subcommand("protocol-fixtures", "Write one sample frame per wire message type");
  c_fix->add_option("--out", fixtures_dir)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (c_bind->parsed()) return cmd_bind(bind, out);
    if (c_sim->parsed()) return cmd_simulate(sim, out);
    if (c_ren->parsed()) return cmd_render(ren, out);
    if (c_srv->parsed()) return cmd_serve(srv, out);
    if (c_bench->parsed()) return cmd_bench(bench, out);
    if (c_demo->parsed()) return cmd_demo_scene(demo, seed, out);
    if (c_fix->parsed()) return cmd_protocol_fixtures(fixtures_dir, seed, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::NonFiniteState ? kExitSimulation : kExitInput;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSimulation;
  }
  return kExitInput;
}

}  // namespace gsverse::cli
