#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ian/network.hpp"
#include "ian/render.hpp"

using namespace ian;

namespace {

Vec3 random_dir(Rng& rng) {
  // Normal deviates give an isotropic direction.
  return normalized({rng.normal(), rng.normal(), rng.normal()});
}

double rms(const SHLight& a, const SHLight& b) {
  double s = 0;
  for (int k = 0; k < kShCoeffs; ++k) s += std::pow(a.c[k] - b.c[k], 2);
  return std::sqrt(s / kShCoeffs);
}

}  // namespace

TEST_CASE("basis is orthonormal under quadrature") {
  for (int j = 0; j < kShCoeffs; ++j) {
    const auto proj = sh_numeric_oracle([j](const Vec3& n) { return sh_basis(n)[j]; }, 20000);
    for (int k = 0; k < kShCoeffs; ++k) CHECK(std::abs(proj.c[k] - (j == k ? 1.0 : 0.0)) < 1e-3);
  }
  const auto dc = sh_numeric_oracle([](const Vec3&) { return 2.0; }, 4000);
  CHECK(dc.c[0] == doctest::Approx(2.0 * std::sqrt(4 * std::numbers::pi)).epsilon(1e-9));
  for (int k = 1; k < kShCoeffs; ++k) CHECK(std::abs(dc.c[k]) < 1e-3);
  CHECK_THROWS_AS(sh_numeric_oracle([](const Vec3&) { return 1.0; }, 999), Error);
}

TEST_CASE("quadrature converges when samples double") {
  const Vec3 d = normalized({0.3, -0.5, 0.8});
  auto f = [&](const Vec3& n) { return std::max(0.0, dot(n, d)); };
  const auto exact = sh_from_direction(d);
  const double e1 = rms(sh_numeric_oracle(f, 2000), exact), e2 = rms(sh_numeric_oracle(f, 8000), exact);
  CHECK(e2 < e1);
}

TEST_CASE("directional light coefficients agree with the clamped-cosine projection") {
  Rng rng(21);
  for (int i = 0; i < 10; ++i) {
    const auto d = random_dir(rng);
    const auto num = sh_numeric_oracle([&](const Vec3& n) { return std::max(0.0, dot(n, d)); }, 20000);
    CHECK(rms(sh_from_direction(d), num) < 1e-3);
  }
  const auto up = sh_from_direction({0, 0, 1});
  for (int k : {1, 3, 4, 5, 7, 8}) CHECK(std::abs(up.c[k]) < 1e-12);
  CHECK_THROWS_AS(sh_from_direction({0, 0, 0}), Error);
}

TEST_CASE("order-2 irradiance approximates the clamped cosine") {
  Rng rng(22);
  const auto d = random_dir(rng);
  const auto l = sh_from_direction(d, 1.5);
  double s = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto n = random_dir(rng);
    s += std::pow(sh_irradiance(l, n) - 1.5 * std::max(0.0, dot(n, d)), 2);
  }
  CHECK(std::sqrt(s / 1000) <= 0.05 * 1.5);
}

TEST_CASE("light directions follow the compass convention") {
  const auto n = light_direction(0, 0), e = light_direction(90, 0), z = light_direction(123, 90);
  CHECK(n[1] == doctest::Approx(-1));
  CHECK(std::abs(n[0]) < 1e-15);
  CHECK(e[0] == doctest::Approx(1));
  CHECK(z[2] == doctest::Approx(1));
  const auto t = tint_for_temperature(6500);
  CHECK((t[0] == 1 && t[1] == 1 && t[2] == 1));
  const auto warm = tint_for_temperature(4500);
  CHECK(warm[0] > warm[2]);
}

TEST_CASE("lambertian sphere under overhead light") {
  SceneDescriptor s;
  // Centred on pixel (17, 17) of a 32 grid.
  const double c0 = (2 * 17 + 1 - 32) / 32.0;
  s.spheres.push_back({{c0, c0, 0.4}, 0.4, {0.5, 0.6, 0.7}});
  const auto top = LightSpec::from_angles(0, 90, 1.0, {1, 1, 1}, 0.0);
  const auto r = render_lambertian(s, top, 32);
  CHECK(r.object[17 * 32 + 17] == 0);
  for (int c = 0; c < 3; ++c) CHECK(r.image.at({c, 17, 17}) == doctest::Approx(s.spheres[0].albedo[c]).epsilon(1e-6));
  CHECK(r.depth.at({0, 17, 17}) == doctest::Approx(kCameraZ - 0.8).epsilon(1e-6));
  CHECK(r.depth.at({0, 0, 0}) == doctest::Approx(kCameraZ));
  CHECK(r.normal.at({2, 17, 17}) == doctest::Approx(1).epsilon(1e-6));

  // Light from below the horizon: only ambient remains.
  auto behind = LightSpec::from_angles(0, -90, 1.0, {1, 1, 1}, 0.2);
  const auto rb = render_lambertian(s, behind, 32);
  for (int c = 0; c < 3; ++c) CHECK(rb.image.at({c, 17, 17}) == doctest::Approx(0.2 * s.spheres[0].albedo[c]).epsilon(1e-6));
}

TEST_CASE("sphere casts a shadow on the plane") {
  SceneDescriptor s;
  s.spheres.push_back({{0, 0, 0.3}, 0.3, {0.8, 0.8, 0.8}});
  const auto l = LightSpec::from_angles(90, 30, 1.0, {1, 1, 1}, 0.1);
  const auto r = render_lambertian(s, l, 64);
  // Plane point west of the sphere, on the far side from an east light.
  const int px = 10, py = 32;
  const double wx = (2.0 * px + 1 - 64) / 64;
  REQUIRE(r.object[py * 64 + px] == -1);
  // Ray towards the light from (wx, ~0, 0) hits the sphere when within its silhouette.
  const Vec3 o{wx, (2.0 * py + 1 - 64) / 64, 0};
  const auto& d = l.dir;
  const Vec3 oc{o[0], o[1], o[2] - 0.3};
  const double b = dot(oc, d), c = dot(oc, oc) - 0.09;
  REQUIRE(b * b - c > 0);
  for (int ch = 0; ch < 3; ++ch)
    CHECK(r.image.at({ch, py, px}) == doctest::Approx(s.plane_albedo[ch] * 0.1).epsilon(1e-6));
}

TEST_CASE("renderer is linear in intensity before clamping") {
  Rng rng(23);
  const auto scene = random_scene(rng);
  const auto l1 = LightSpec::from_angles(40, 35, 0.6, {1, 0.9, 0.8}, 0.0);
  auto l2 = l1;
  l2.intensity = 1.2;
  const auto a = render_lambertian(scene, l1, 32, false), b = render_lambertian(scene, l2, 32, false);
  for (std::size_t i = 0; i < a.image.numel(); ++i)
    CHECK(b.image.data()[i] == doctest::Approx(2 * a.image.data()[i]).epsilon(1e-6));
}

TEST_CASE("mirrored scene renders the mirrored image exactly") {
  Rng rng(24);
  for (int k = 0; k < 5; ++k) {
    const auto scene = random_scene(rng);
    const auto light = LightSpec::from_angles(rng.uniform(0, 360), rng.uniform(20, 70), 0.9, {1, 0.95, 0.9}, 0.1);
    const auto a = render_lambertian(scene, light, 48);
    const auto b = render_lambertian(mirror_scene(scene), mirror_light(light), 48);
    bool same = true;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) same = same && a.image.at({c, y, x}) == b.image.at({c, y, 47 - x});
    CHECK(same);
  }
  const auto w = LightSpec::from_angles(270, 40, 1, {1, 1, 1}, 0.1);
  CHECK(mirror_light(w).azimuth == doctest::Approx(90));
}

TEST_CASE("normals from rendered depth match analytic normals") {
  SceneDescriptor s;
  s.spheres.push_back({{0, 0, 0.5}, 0.5, {0.7, 0.7, 0.7}});
  const std::int64_t n = 128;
  const auto r = render_lambertian(s, LightSpec{}, n);
  // Depth in pixel units so the finite differences see the true slope.
  std::vector<double> d(r.depth.data().begin(), r.depth.data().end());
  for (auto& v : d) v *= double(n) / 2;
  const auto est = normal_from_depth(Tensor64({1, 1, n, n}, d));
  double err = 0;
  int count = 0;
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x) {
      const double wx = (2.0 * x + 1 - n) / n, wy = (2.0 * y + 1 - n) / n;
      if (std::hypot(wx, wy) > 0.5 * 0.85) continue;  // away from the silhouette
      // Camera-facing analytic normal (nx, ny, nz) corresponds to (nx, ny, -nz) here.
      const Vec3 a{r.normal.at({0, y, x}), r.normal.at({1, y, x}), -r.normal.at({2, y, x})};
      const Vec3 e{est.at({0, 0, y, x}), est.at({0, 1, y, x}), est.at({0, 2, y, x})};
      err += std::acos(std::clamp(dot(a, e), -1.0, 1.0));
      ++count;
    }
  CHECK(count > 100);
  CHECK(err / count < 0.05);
}

TEST_CASE("random scenes stay within their ranges") {
  Rng rng(25);
  const SceneRanges rg;
  for (int k = 0; k < 50; ++k) {
    const auto s = random_scene(rng, rg);
    CHECK(static_cast<int>(s.spheres.size()) >= rg.min_spheres);
    CHECK(static_cast<int>(s.spheres.size()) <= rg.max_spheres);
    for (std::size_t i = 0; i < s.spheres.size(); ++i) {
      const auto& a = s.spheres[i];
      CHECK(a.radius >= rg.min_radius);
      CHECK(a.radius <= rg.max_radius);
      for (std::size_t j = i + 1; j < s.spheres.size(); ++j) {
        const auto& b = s.spheres[j];
        CHECK(std::hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) >= a.radius + b.radius);
      }
    }
  }
}
