#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "gsverse/assets.hpp"
#include "gsverse/error.hpp"

namespace gsverse {
namespace {

enum class ScalarType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<ScalarType> parse_scalar_type(std::string_view name) {
  static const std::map<std::string_view, ScalarType> kTypes = {
      {"char", ScalarType::I8},     {"int8", ScalarType::I8},     {"uchar", ScalarType::U8},
      {"uint8", ScalarType::U8},    {"short", ScalarType::I16},   {"int16", ScalarType::I16},
      {"ushort", ScalarType::U16},  {"uint16", ScalarType::U16},  {"int", ScalarType::I32},
      {"int32", ScalarType::I32},   {"uint", ScalarType::U32},    {"uint32", ScalarType::U32},
      {"float", ScalarType::F32},   {"float32", ScalarType::F32}, {"double", ScalarType::F64},
      {"float64", ScalarType::F64},
  };
  auto it = kTypes.find(name);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::I8:
    case ScalarType::U8: return 1;
    case ScalarType::I16:
    case ScalarType::U16: return 2;
    case ScalarType::I32:
    case ScalarType::U32:
    case ScalarType::F32: return 4;
    case ScalarType::F64: return 8;
  }
  return 0;
}

template <typename T>
float load_as_float(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return static_cast<float>(v);
}

float read_scalar(const std::uint8_t* p, ScalarType t) {
  switch (t) {
    case ScalarType::I8: return load_as_float<std::int8_t>(p);
    case ScalarType::U8: return load_as_float<std::uint8_t>(p);
    case ScalarType::I16: return load_as_float<std::int16_t>(p);
    case ScalarType::U16: return load_as_float<std::uint16_t>(p);
    case ScalarType::I32: return load_as_float<std::int32_t>(p);
    case ScalarType::U32: return load_as_float<std::uint32_t>(p);
    case ScalarType::F32: return load_as_float<float>(p);
    case ScalarType::F64: return load_as_float<double>(p);
  }
  return 0.0f;
}

struct Property {
  ScalarType type;
  std::size_t offset;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedPly, what); }

}  // namespace

GaussianCloud load_gaussian_ply(ByteView bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) malformed("header is not terminated by end_header");
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };

  if (next_line() != "ply") malformed("missing 'ply' magic");

  bool have_format = false;
  bool in_vertex = false;
  bool seen_vertex = false;
  bool vertex_closed = false;
  std::size_t count = 0;
  std::size_t stride = 0;
  std::map<std::string, Property, std::less<>> props;

  for (;;) {
    const auto line = next_line();
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) malformed("bad format line");
      if (tok[1] == "ascii" || tok[1] == "binary_big_endian") {
        throw Error(ErrorCode::UnsupportedFormat, std::string(tok[1]) + " PLY is not supported");
      }
      if (tok[1] != "binary_little_endian") malformed("unknown format " + std::string(tok[1]));
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) malformed("bad element line");
      if (in_vertex) vertex_closed = true;
      in_vertex = false;
      if (tok[1] == "vertex") {
        if (seen_vertex) malformed("duplicate vertex element");
        if (vertex_closed || !props.empty()) malformed("vertex element must come first");
        seen_vertex = true;
        in_vertex = true;
        std::uint64_t n = 0;
        auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), n);
        if (ec != std::errc() || ptr != tok[2].data() + tok[2].size()) malformed("bad vertex count");
        count = n;
      } else if (!seen_vertex) {
        malformed("expected element 'vertex', found '" + std::string(tok[1]) + "'");
      } else {
        vertex_closed = true;  // trailing elements are ignored
      }
    } else if (tok[0] == "property") {
      if (!seen_vertex) malformed("property before any element");
      if (!in_vertex) continue;
      if (tok.size() >= 2 && tok[1] == "list") malformed("list properties are not allowed on vertex");
      if (tok.size() != 3) malformed("bad property line");
      const auto type = parse_scalar_type(tok[1]);
      if (!type) malformed("unknown property type " + std::string(tok[1]));
      if (props.contains(tok[2])) malformed("duplicate property " + std::string(tok[2]));
      props.emplace(std::string(tok[2]), Property{*type, stride});
      stride += scalar_size(*type);
    } else {
      malformed("unexpected header keyword " + std::string(tok[0]));
    }
  }
  if (!have_format) malformed("missing format line");
  if (!seen_vertex) malformed("missing element vertex");

  auto require = [&](const std::string& name) -> const Property& {
    auto it = props.find(name);
    if (it == props.end()) malformed("missing required property " + name);
    return it->second;
  };
  const Property* xyz[3] = {&require("x"), &require("y"), &require("z")};
  const Property* dc[3] = {&require("f_dc_0"), &require("f_dc_1"), &require("f_dc_2")};
  const Property& opacity = require("opacity");
  const Property* scale[3] = {&require("scale_0"), &require("scale_1"), &require("scale_2")};
  const Property* rot[4] = {&require("rot_0"), &require("rot_1"), &require("rot_2"), &require("rot_3")};

  std::size_t rest = 0;
  while (props.contains("f_rest_" + std::to_string(rest))) ++rest;
  for (const auto& [name, _] : props) {
    if (name.starts_with("f_rest_")) {
      int idx = -1;
      std::from_chars(name.data() + 7, name.data() + name.size(), idx);
      if (idx < 0 || static_cast<std::size_t>(idx) >= rest) malformed("f_rest properties are not contiguous");
    }
  }
  if (rest % 3 != 0) malformed("f_rest count is not a multiple of 3");
  const int degree = static_cast<int>(std::lround(std::sqrt(1.0 + rest / 3.0))) - 1;
  if (degree < 0 || degree > 3 || 3 * (sh_coeffs_per_channel(degree) - 1) != rest) {
    malformed("f_rest count " + std::to_string(rest) + " does not match an SH degree in [0,3]");
  }
  std::vector<const Property*> rest_props(rest);
  for (std::size_t j = 0; j < rest; ++j) rest_props[j] = &props.find("f_rest_" + std::to_string(j))->second;

  const ByteView body = bytes.subspan(pos);
  if (stride == 0 || count > body.size() / stride) {
    if (count != 0) malformed("vertex data truncated");
  }

  GaussianCloud cloud;
  cloud.sh_degree = degree;
  cloud.resize(count);
  const std::size_t per_channel = sh_coeffs_per_channel(degree);
  const std::size_t sh_stride = cloud.sh_stride();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* row = body.data() + i * stride;
    auto get = [row](const Property& p) { return read_scalar(row + p.offset, p.type); };
    for (int k = 0; k < 3; ++k) {
      cloud.means[3 * i + k] = get(*xyz[k]);
      cloud.log_scales[3 * i + k] = get(*scale[k]);
      cloud.sh_coeffs[sh_stride * i + k * per_channel] = get(*dc[k]);
    }
    for (std::size_t j = 0; j < rest; ++j) {
      const std::size_t channel = j / (per_channel - 1);
      const std::size_t coeff = 1 + j % (per_channel - 1);
      cloud.sh_coeffs[sh_stride * i + channel * per_channel + coeff] = get(*rest_props[j]);
    }
    cloud.opacity_logits[i] = get(opacity);
    float* q = &cloud.rotations[4 * i];
    for (int k = 0; k < 4; ++k) q[k] = get(*rot[k]);
    const double n = std::sqrt(double(q[0]) * q[0] + double(q[1]) * q[1] + double(q[2]) * q[2] +
                               double(q[3]) * q[3]);
    // Already-unit quaternions are left untouched so save/load is bit-exact.
    if (!(n > 0.0) || !std::isfinite(n)) {
      q[0] = 1.0f;
      q[1] = q[2] = q[3] = 0.0f;
    } else if (std::abs(n - 1.0) > 1e-6) {
      for (int k = 0; k < 4; ++k) q[k] = static_cast<float>(q[k] / n);
    }
  }
  return cloud;
}

Bytes save_gaussian_ply(const GaussianCloud& cloud) {
  cloud.validate();
  const std::size_t per_channel = sh_coeffs_per_channel(cloud.sh_degree);
  const std::size_t rest = 3 * (per_channel - 1);

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.count << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    header << "property float " << name << "\n";
  }
  for (std::size_t j = 0; j < rest; ++j) header << "property float f_rest_" << j << "\n";
  for (const char* name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    header << "property float " << name << "\n";
  }
  header << "end_header\n";

  ByteWriter out;
  out.put_raw(header.str());
  const std::size_t sh_stride = cloud.sh_stride();
  for (std::size_t i = 0; i < cloud.count; ++i) {
    for (int k = 0; k < 3; ++k) out.put(cloud.means[3 * i + k]);
    for (int k = 0; k < 3; ++k) out.put(0.0f);
    for (int k = 0; k < 3; ++k) out.put(cloud.sh_coeffs[sh_stride * i + k * per_channel]);
    for (std::size_t j = 0; j < rest; ++j) {
      const std::size_t channel = j / (per_channel - 1);
      const std::size_t coeff = 1 + j % (per_channel - 1);
      out.put(cloud.sh_coeffs[sh_stride * i + channel * per_channel + coeff]);
    }
    out.put(cloud.opacity_logits[i]);
    for (int k = 0; k < 3; ++k) out.put(cloud.log_scales[3 * i + k]);
    for (int k = 0; k < 4; ++k) out.put(cloud.rotations[4 * i + k]);
  }
  return out.take();
}

}  // namespace gsverse
