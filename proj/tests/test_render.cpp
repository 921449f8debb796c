#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include "doctest.h"

#include "gsverse/error.hpp"
#include "gsverse/reference.hpp"
#include "gsverse/render.hpp"
#include "support.hpp"

using namespace gsverse;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

Camera test_camera(int w = 64, int h = 48) {
  Camera c;
  c.fx = c.fy = 60.0;
  c.width = w;
  c.height = h;
  c.cx = 0.5 * (w - 1);
  c.cy = 0.5 * (h - 1);
  c.world_to_cam(2, 3) = 4.0;  // world origin 4 m in front of the camera
  return c;
}

// One splat with the given world mean, isotropic std-dev, rgb and opacity logit.
void add_splat(GaussianCloud& c, const Vector3d& mean, double sigma, const Vector3d& rgb, float logit) {
  const std::size_t i = c.count;
  c.resize(i + 1);
  for (int k = 0; k < 3; ++k) {
    c.means[3 * i + k] = float(mean[k]);
    c.log_scales[3 * i + k] = float(std::log(sigma));
    c.sh_coeffs[c.sh_stride() * i + k * sh_coeffs_per_channel(c.sh_degree)] = float((rgb[k] - 0.5) / kShC0);
  }
  c.rotations[4 * i] = 1.0f;
  c.opacity_logits[i] = logit;
}

GaussianCloud random_scene(std::size_t n, int degree, std::uint64_t seed) {
  GaussianCloud c = gsverse::testing::random_cloud(n, degree, seed, 1.2f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> ls(-3.0f, -1.2f);
  for (auto& s : c.log_scales) s = ls(rng);
  return c;
}

Image uniform_image(int w, int h, float v) {
  Image img(w, h);
  for (std::size_t i = 0; i < img.rgba.size(); ++i) img.rgba[i] = (i % 4 == 3) ? 1.0f : v;
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rgba.size(); ++i) m = std::max(m, double(std::abs(a.rgba[i] - b.rgba[i])));
  return m;
}

}  // namespace

TEST_CASE("on-axis projection is centred and isotropic") {
  const Camera cam = test_camera();
  const double s = 0.05, d = 4.0;
  const auto p = project_gaussian(Vector3d::Zero(), s * s * Matrix3d::Identity(), cam);
  REQUIRE(p.has_value());
  CHECK(p->center.x() == doctest::Approx(cam.cx));
  CHECK(p->center.y() == doctest::Approx(cam.cy));
  CHECK(p->depth == doctest::Approx(d));
  const double expect = std::pow(cam.fx * s / d, 2);
  const Eigen::Matrix2d raw = p->cov2d - kScreenDilation * Eigen::Matrix2d::Identity();
  CHECK(std::abs(raw(0, 0) - expect) <= 0.01 * expect);
  CHECK(std::abs(raw(1, 1) - expect) <= 0.01 * expect);
  CHECK(std::abs(raw(0, 1)) <= 0.01 * expect);
}

TEST_CASE("splats behind the camera or off screen are culled") {
  const Camera cam = test_camera();
  const Matrix3d cov = 0.01 * Matrix3d::Identity();
  CHECK_FALSE(project_gaussian(Vector3d(0, 0, -5), cov, cam).has_value());
  CHECK_FALSE(project_gaussian(Vector3d(0, 0, -4 + 0.5 * cam.near), cov, cam).has_value());
  CHECK_FALSE(project_gaussian(Vector3d(40, 0, 0), cov, cam).has_value());
  CHECK(project_gaussian(Vector3d(0.3, -0.2, 0), cov, cam).has_value());
}

TEST_CASE("projected covariance agrees with Monte Carlo through the full projection") {
  const Camera cam = test_camera();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix3d q = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)).normalized().toRotationMatrix();
    const Vector3d sd(0.08, 0.04, 0.02);
    const Matrix3d cov = q * sd.cwiseProduct(sd).asDiagonal() * q.transpose();
    const Vector3d mean(0.05 * g(rng), 0.05 * g(rng), 0.0);
    const auto p = project_gaussian(mean, cov, cam);
    REQUIRE(p.has_value());
    const Eigen::LLT<Matrix3d> llt(cov);
    const Matrix3d l = llt.matrixL();
    const int n = 100000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
      const Vector3d x = mean + l * Vector3d(g(rng), g(rng), g(rng));
      const Vector3d c = cam.rotation() * x + cam.translation();
      const Eigen::Vector2d uv(cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy);
      sum += uv;
      sq += uv * uv.transpose();
    }
    const Eigen::Vector2d mu = sum / n;
    const Eigen::Matrix2d mc = sq / n - mu * mu.transpose();
    const Eigen::Matrix2d raw = p->cov2d - kScreenDilation * Eigen::Matrix2d::Identity();
    CHECK((raw - mc).norm() <= 0.05 * mc.norm());
  }
}

TEST_CASE("spherical harmonics evaluation") {
  std::vector<float> zeros(3 * 16, 0.0f);
  for (int d = 0; d <= 3; ++d) {
    std::span<const float> s(zeros.data(), 3 * sh_coeffs_per_channel(d));
    CHECK(eval_sh(s, Vector3d(0, 0, 1), d) == Vector3d(0.5, 0.5, 0.5));
  }
  const std::vector<float> dc{float(0.25 / kShC0), 0.0f, float(-0.25 / kShC0)};
  const Vector3d rgb = eval_sh(dc, Vector3d(1, 0, 0), 0);
  CHECK((rgb - Vector3d(0.75, 0.5, 0.25)).norm() <= 1e-6);
  CHECK(eval_sh(dc, Vector3d(0, 1, 0), 0) == rgb);

  // Band 1 is odd: antipodal directions negate its contribution.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-0.3f, 0.3f);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> c(12);
    for (auto& x : c) x = u(rng);
    for (int ch = 0; ch < 3; ++ch) c[4 * ch] = 1.0f;  // keep clear of the clamp
    std::vector<float> dc_only(12, 0.0f);
    for (int ch = 0; ch < 3; ++ch) dc_only[4 * ch] = 1.0f;
    const Vector3d dir = Vector3d(g(rng), g(rng), g(rng)).normalized();
    const Vector3d base = eval_sh(dc_only, dir, 1);
    const Vector3d plus = eval_sh(c, dir, 1) - base;
    const Vector3d minus = eval_sh(c, -dir, 1) - base;
    REQUIRE((plus + minus).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("empty cloud renders the background") {
  const Vector3d bg(0.1, 0.2, 0.3);
  const Image img = render(GaussianCloud{}, test_camera(), {bg});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float* p = img.pixel(x, y);
      REQUIRE(p[0] == float(bg[0]));
      REQUIRE(p[1] == float(bg[1]));
      REQUIRE(p[2] == float(bg[2]));
      REQUIRE(p[3] == 0.0f);
    }
  }
}

TEST_CASE("one opaque red splat over the background") {
  const Camera cam = test_camera(33, 33);
  GaussianCloud c;
  add_splat(c, Vector3d::Zero(), 0.5, Vector3d(1, 0, 0), 12.0f);
  const Vector3d bg(0.2, 0.4, 0.6);
  const Image img = render(c, cam, {bg});
  const float* p = img.pixel(16, 16);
  CHECK(std::abs(p[0] - (0.999 + 0.001 * bg[0])) <= 1e-3);
  CHECK(std::abs(p[1] - 0.001 * bg[1]) <= 1e-3);
  CHECK(std::abs(p[2] - 0.001 * bg[2]) <= 1e-3);
  CHECK(std::abs(p[3] - 0.999) <= 1e-6);
}

TEST_CASE("tiled renderer matches the naive oracle") {
  const Camera cam = test_camera(80, 60);
  for (int degree : {0, 1, 3}) {
    const GaussianCloud c = random_scene(100, degree, 10 + degree);
    const Vector3d bg(0.05, 0.1, 0.2);
    const Image ref = reference::render_naive(c, cam, bg);
    for (int tile : {16, 7}) {
      for (unsigned threads : {1u, 4u}) {
        const Image img = render(c, cam, {bg, threads, tile});
        REQUIRE(max_abs_diff(img, ref) < 1e-6);
      }
    }
  }
}

TEST_CASE("render output does not depend on threads or tile size") {
  const Camera cam = test_camera(70, 50);
  const GaussianCloud c = random_scene(400, 2, 3);
  const Image a = render(c, cam, {Vector3d::Zero(), 1, 16});
  CHECK(render(c, cam, {Vector3d::Zero(), 3, 16}).rgba == a.rgba);
  CHECK(render(c, cam, {Vector3d::Zero(), 2, 5}).rgba == a.rgba);
}

TEST_CASE("swapping the input order of two overlapping splats changes nothing") {
  const Camera cam = test_camera();
  GaussianCloud ab, ba;
  add_splat(ab, Vector3d(0, 0, 0.5), 0.3, Vector3d(1, 0, 0), 1.0f);
  add_splat(ab, Vector3d(0.1, 0, -0.5), 0.3, Vector3d(0, 1, 0), 1.0f);
  add_splat(ba, Vector3d(0.1, 0, -0.5), 0.3, Vector3d(0, 1, 0), 1.0f);
  add_splat(ba, Vector3d(0, 0, 0.5), 0.3, Vector3d(1, 0, 0), 1.0f);
  CHECK(render(ab, cam).rgba == render(ba, cam).rgba);
}

TEST_CASE("raising a splat's opacity never lowers its contribution at its centre") {
  const Camera cam = test_camera(33, 33);
  for (double z : {-0.5, 0.5}) {  // red in front of and behind a green splat
    double last = -1.0;
    for (int step = 0; step <= 30; ++step) {
      GaussianCloud c;
      add_splat(c, Vector3d(0, 0, z), 0.3, Vector3d(1, 0, 0), float(-6.0 + 0.4 * step));
      add_splat(c, Vector3d(0, 0, -z), 0.3, Vector3d(0, 1, 0), 0.5f);
      const Image img = render(c, cam, {Vector3d(0, 0, 1)});
      const double red = img.pixel(16, 16)[0];  // only the red splat emits red
      REQUIRE(red >= last);
      last = red;
    }
  }
}

TEST_CASE("alpha bounded, channels finite, uncovered pixels equal background") {
  const Camera cam = test_camera(64, 48);
  const GaussianCloud c = random_scene(60, 1, 21);
  const Vector3d bg(0.3, 0.6, 0.9);
  const Image img = render(c, cam, {bg});
  const auto splats = prepare_splats(c, cam);
  std::size_t uncovered = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float* p = img.pixel(x, y);
      for (int k = 0; k < 4; ++k) REQUIRE(std::isfinite(p[k]));
      REQUIRE(p[3] >= 0.0f);
      REQUIRE(p[3] <= 1.0f);
      bool covered = false;
      for (const auto& s : splats) {
        const double dx = x - s.proj.center.x(), dy = y - s.proj.center.y();
        const double q = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
        if (q <= kFootprintMahalanobisSq) covered = true;
      }
      if (!covered) {
        ++uncovered;
        for (int k = 0; k < 3; ++k) REQUIRE(p[k] == float(bg[k]));
      }
    }
  }
  CHECK(uncovered > 0);
}

TEST_CASE("psnr and mse") {
  const Image a = uniform_image(8, 6, 0.5f);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(mse(a, a) == 0.0);
  const Image b = uniform_image(8, 6, 0.6f);
  // 0.6f - 0.5f is 0.1 only to float rounding.
  CHECK(std::abs(mse(a, b) - 0.01) <= 1e-8);
  CHECK(std::abs(psnr(a, b) - 20.0) <= 1e-5);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image x(17, 9), y(17, 9);
  for (auto& v : x.rgba) v = u(rng);
  for (auto& v : y.rgba) v = u(rng);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rgba.size(); ++i) {
    if (i % 4 != 3) sum += std::pow(double(x.rgba[i]) - double(y.rgba[i]), 2);
  }
  const double expect = sum / (17.0 * 9.0 * 3.0);
  CHECK(std::abs(mse(x, y) - expect) <= 1e-9);
  CHECK(std::abs(psnr(x, y) - 10.0 * std::log10(1.0 / expect)) <= 1e-9);

  try {
    psnr(a, Image(8, 7));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("png export is deterministic and well formed") {
  const Camera cam = test_camera(40, 30);
  const Image img = render(random_scene(50, 0, 5), cam, {Vector3d(0.2, 0.2, 0.2)});
  const Bytes a = encode_png(img), b = encode_png(img);
  CHECK(a == b);
  REQUIRE(a.size() > 8);
  const std::uint8_t sig[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  CHECK(std::equal(std::begin(sig), std::end(sig), a.begin()));
  // IHDR width and height, big-endian.
  CHECK(a[16] == 0);
  CHECK(a[19] == 40);
  CHECK(a[23] == 30);
}

TEST_CASE("camera json round trip and validation") {
  Camera cam = look_at(Vector3d(3, -2, 1.5), Vector3d::Zero(), Vector3d(0, 0, 1), 320, 240, 300.0);
  CHECK_NOTHROW(cam.validate());
  const Camera back = camera_from_json(camera_to_json(cam));
  CHECK(back.world_to_cam == cam.world_to_cam);
  CHECK(back.fx == cam.fx);
  CHECK(back.width == 320);
  CHECK((cam.center_world() - Vector3d(3, -2, 1.5)).norm() <= 1e-9);
  // The target projects to the principal point.
  const auto p = project_gaussian(Vector3d::Zero(), 1e-4 * Matrix3d::Identity(), cam);
  REQUIRE(p.has_value());
  CHECK((p->center - Eigen::Vector2d(cam.cx, cam.cy)).norm() <= 1e-9);

  nlohmann::json j = camera_to_json(cam);
  j["fx"] = -1.0;
  CHECK_THROWS_AS(camera_from_json(j), Error);
  j = camera_to_json(cam);
  j["world_to_cam"] = std::vector<double>(16, 2.0);
  CHECK_THROWS_AS(camera_from_json(j), Error);
  j = camera_to_json(cam);
  j.erase("height");
  CHECK_THROWS_AS(camera_from_json(j), Error);
  // Nested row form is accepted too.
  j = camera_to_json(cam);
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({cam.world_to_cam(r, 0), cam.world_to_cam(r, 1), cam.world_to_cam(r, 2),
                                              cam.world_to_cam(r, 3)});
  j["world_to_cam"] = rows;
  CHECK(camera_from_json(j).world_to_cam == cam.world_to_cam);
}
