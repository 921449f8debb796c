#include "gsverse/protocol.hpp"

#include "gsverse/error.hpp"

namespace gsverse::protocol {
namespace {

void put_vec3s(ByteWriter& out, const std::vector<Eigen::Vector3f>& v) {
  out.put(static_cast<std::uint32_t>(v.size()));
  for (const auto& p : v) out.put_array<float>(std::span<const float>(p.data(), 3));
}

std::vector<Eigen::Vector3f> get_vec3s(ByteReader& in) {
  const auto n = in.get<std::uint32_t>();
  const auto flat = in.get_vector<float>(std::size_t(n) * 3);
  std::vector<Eigen::Vector3f> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = Eigen::Vector3f(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  return v;
}

template <typename T, std::size_t N>
std::array<T, N> get_fixed(ByteReader& in) {
  std::array<T, N> a;
  in.get_array<T>(a);
  return a;
}

struct Encoder {
  ByteWriter& out;

  void operator()(const Init& m) {
    out.put(static_cast<std::uint32_t>(m.objects.size()));
    for (const auto& obj : m.objects) {
      out.put(static_cast<std::uint32_t>(obj.name.size()));
      out.put_raw(obj.name);
      put_vec3s(out, obj.rest_vertices);
      out.put(static_cast<std::uint32_t>(obj.faces.size()));
      for (const auto& f : obj.faces) out.put_array<std::uint32_t>(f);
      write_anchors(out, obj.anchors);
      write_appearance(out, obj.appearance);
    }
    out.put(m.epsilon_flat);
    out.put(m.rho_max);
  }
  void operator()(const VerticesFrame& m) {
    out.put(m.frame_index);
    out.put(m.sim_time);
    out.put(m.object_id);
    put_vec3s(out, m.positions);
  }
  void operator()(const GrabInput& m) {
    out.put(m.object_id);
    out.put(m.face_id);
    out.put_array<float>(m.bary);
    out.put_array<float>(m.target);
    out.put(m.stiffness);
  }
  void operator()(const MoveTarget& m) {
    out.put(m.grab_id);
    out.put_array<float>(m.target);
  }
  void operator()(const Release& m) { out.put(m.grab_id); }
  void operator()(const GrabAck& m) { out.put(m.grab_id); }
  void operator()(const MacroInput& m) {
    out.put(m.kind);
    out.put(m.object_id);
    out.put_array<float>(m.params);
  }
  void operator()(const Stats& m) {
    out.put(m.mean_ms);
    out.put(m.p50_ms);
    out.put(m.p99_ms);
    out.put(m.splats_per_s);
  }
  void operator()(const ErrorFrame& m) {
    out.put(m.code);
    out.put_raw(m.detail);
  }
};

}  // namespace

MessageType type_of(const Message& msg) {
  static constexpr MessageType kTypes[] = {MessageType::Init,       MessageType::VerticesFrame, MessageType::GrabInput,
                                           MessageType::MoveTarget, MessageType::Release,       MessageType::GrabAck,
                                           MessageType::MacroInput, MessageType::Stats,         MessageType::Error};
  return kTypes[msg.index()];
}

Bytes encode(const Message& msg) {
  ByteWriter out;
  out.put_raw(std::string_view("GSVW"));
  out.put(kVersion);
  out.put(static_cast<std::uint8_t>(type_of(msg)));
  std::visit(Encoder{out}, msg);
  return out.take();
}

Message decode(ByteView bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "frame shorter than magic");
  if (std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "GSVW") {
    throw Error(ErrorCode::BadMagic, "frame does not start with GSVW");
  }
  ByteReader in(bytes.subspan(4), ErrorCode::Truncated);
  const auto version = in.get<std::uint16_t>();
  if (version != kVersion) throw Error(ErrorCode::VersionMismatch, "protocol version " + std::to_string(version));
  const auto type = in.get<std::uint8_t>();

  Message msg;
  switch (static_cast<MessageType>(type)) {
    case MessageType::Init: {
      Init m;
      const auto n = in.get<std::uint32_t>();
      for (std::uint32_t i = 0; i < n; ++i) {
        InitObject obj;
        obj.name = in.get_string(in.get<std::uint32_t>());
        obj.rest_vertices = get_vec3s(in);
        const auto nf = in.get<std::uint32_t>();
        const auto flat = in.get_vector<std::uint32_t>(std::size_t(nf) * 3);
        obj.faces.resize(nf);
        for (std::size_t f = 0; f < nf; ++f) obj.faces[f] = {flat[3 * f], flat[3 * f + 1], flat[3 * f + 2]};
        obj.anchors = read_anchors(in);
        obj.appearance = read_appearance(in);
        m.objects.push_back(std::move(obj));
      }
      m.epsilon_flat = in.get<float>();
      m.rho_max = in.get<float>();
      msg = std::move(m);
      break;
    }
    case MessageType::VerticesFrame: {
      VerticesFrame m;
      m.frame_index = in.get<std::uint64_t>();
      m.sim_time = in.get<double>();
      m.object_id = in.get<std::uint32_t>();
      m.positions = get_vec3s(in);
      msg = std::move(m);
      break;
    }
    case MessageType::GrabInput: {
      GrabInput m;
      m.object_id = in.get<std::uint32_t>();
      m.face_id = in.get<std::uint32_t>();
      m.bary = get_fixed<float, 3>(in);
      m.target = get_fixed<float, 3>(in);
      m.stiffness = in.get<float>();
      msg = m;
      break;
    }
    case MessageType::MoveTarget: {
      MoveTarget m;
      m.grab_id = in.get<std::uint32_t>();
      m.target = get_fixed<float, 3>(in);
      msg = m;
      break;
    }
    case MessageType::Release: msg = Release{in.get<std::uint32_t>()}; break;
    case MessageType::GrabAck: msg = GrabAck{in.get<std::uint32_t>()}; break;
    case MessageType::MacroInput: {
      MacroInput m;
      m.kind = in.get<std::uint8_t>();
      m.object_id = in.get<std::uint32_t>();
      m.params = get_fixed<float, 4>(in);
      msg = m;
      break;
    }
    case MessageType::Stats: {
      Stats m;
      m.mean_ms = in.get<float>();
      m.p50_ms = in.get<float>();
      m.p99_ms = in.get<float>();
      m.splats_per_s = in.get<float>();
      msg = m;
      break;
    }
    case MessageType::Error: {
      ErrorFrame m;
      m.code = in.get<std::uint32_t>();
      m.detail = in.get_string(in.remaining());
      msg = std::move(m);
      break;
    }
    default: throw Error(ErrorCode::UnknownMessageType, "message type " + std::to_string(type));
  }
  if (!in.at_end()) {
    throw Error(ErrorCode::MalformedMessage, std::to_string(in.remaining()) + " trailing bytes after payload");
  }
  return msg;
}

Init make_init(const SceneBundle& bundle) {
  Init init;
  for (const auto& obj : bundle.objects) {
    init.objects.push_back({obj.name, obj.rest_vertices, obj.mesh.faces, obj.anchors, obj.appearance});
  }
  return init;
}

}  // namespace gsverse::protocol
