#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

#include "gsverse/assets.hpp"
#include "gsverse/bundle.hpp"
#include "gsverse/meshparam.hpp"
#include "gsverse/primitives.hpp"

namespace gsverse::testing {

inline GaussianCloud random_cloud(std::size_t n, int degree, std::uint64_t seed, float extent = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> pos(-extent, extent), ls(-4.0f, -1.0f), u(-1.0f, 1.0f), op(-3.0f, 3.0f);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  GaussianCloud c;
  c.sh_degree = degree;
  c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      c.means[3 * i + k] = pos(rng);
      c.log_scales[3 * i + k] = ls(rng);
    }
    Eigen::Vector4f q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    for (int k = 0; k < 4; ++k) c.rotations[4 * i + k] = q[k];
    c.opacity_logits[i] = op(rng);
  }
  for (auto& s : c.sh_coeffs) s = u(rng);
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gsverse_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream(path, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// One soft or rigid object with k uniform anchors per face.
inline SceneBundle single_object_scene(TriMesh mesh, std::uint32_t k, BodyKind body, bool gravity = false,
                                       std::uint64_t seed = 0) {
  SceneBundle b;
  ObjectSettings s;
  s.body = body;
  b.add_object(place_uniform(mesh, k, seed, "obj"), s);
  if (!gravity) b.meta.gravity = {0.0, 0.0, 0.0};
  return b;
}

}  // namespace gsverse::testing
