#include <charconv>
#include <sstream>
#include <string>

#include "gsverse/assets.hpp"
#include "gsverse/error.hpp"

namespace gsverse {
namespace {

[[noreturn]] void malformed(std::size_t line_no, std::string_view line, const std::string& why) {
  throw Error(ErrorCode::MalformedObj,
              "line " + std::to_string(line_no) + " '" + std::string(line) + "': " + why);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

ObjLoadResult load_obj(std::string_view text) {
  ObjLoadResult result;
  TriMesh& mesh = result.mesh;
  std::vector<std::int32_t> vertex_group;
  std::int32_t group = -1;
  bool any_group = false;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::vector<std::string_view> tok;
  std::vector<std::uint32_t> poly;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    tok.clear();
    for (std::size_t i = 0; i < line.size();) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
      if (j > i) tok.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tok.empty()) continue;

    if (tok[0] == "v") {
      if (tok.size() < 4) malformed(line_no, line, "vertex needs 3 coordinates");
      Eigen::Vector3f v;
      for (int k = 0; k < 3; ++k) {
        if (!parse_number(tok[1 + k], v[k])) malformed(line_no, line, "bad coordinate");
      }
      mesh.vertices.push_back(v);
      vertex_group.push_back(group);
    } else if (tok[0] == "f") {
      if (tok.size() < 4) malformed(line_no, line, "face needs at least 3 vertices");
      poly.clear();
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const auto ref = tok[k].substr(0, tok[k].find('/'));
        long long idx = 0;
        if (!parse_number(ref, idx) || idx == 0) malformed(line_no, line, "bad vertex reference");
        const long long nv = static_cast<long long>(mesh.vertices.size());
        const long long resolved = idx > 0 ? idx - 1 : nv + idx;
        if (resolved < 0 || resolved >= nv) {
          throw Error(ErrorCode::IndexOutOfRange,
                      "line " + std::to_string(line_no) + ": vertex " + std::to_string(idx) +
                          " outside 1.." + std::to_string(nv));
        }
        poly.push_back(static_cast<std::uint32_t>(resolved));
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const std::array<std::uint32_t, 3> tri{poly[0], poly[k], poly[k + 1]};
        const bool repeated = tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2];
        if (repeated || !(triangle_area(mesh.vertices[tri[0]].cast<double>(),
                                        mesh.vertices[tri[1]].cast<double>(),
                                        mesh.vertices[tri[2]].cast<double>()) > kMinFaceArea)) {
          ++result.dropped_faces;
          continue;
        }
        mesh.faces.push_back(tri);
      }
    } else if (tok[0] == "o") {
      ++group;
      any_group = true;
    } else if (tok[0] == "vt" || tok[0] == "vn" || tok[0] == "vp" || tok[0] == "g" || tok[0] == "s" ||
               tok[0] == "usemtl" || tok[0] == "mtllib" || tok[0] == "l" || tok[0] == "p") {
      continue;
    } else {
      malformed(line_no, line, "unknown statement");
    }
  }
  if (any_group) {
    for (auto& g : vertex_group) g = std::max(g, 0);
    mesh.labels = std::move(vertex_group);
  }
  return result;
}

std::string save_obj(const TriMesh& mesh) {
  std::ostringstream out;
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  return out.str();
}

}  // namespace gsverse
