#include "ian/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ian {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

Vec3 light_direction(double azimuth_deg, double elevation_deg) {
  const double a = azimuth_deg * kDeg, e = elevation_deg * kDeg;
  return normalized({std::cos(e) * std::sin(a), -std::cos(e) * std::cos(a), std::sin(e)});
}

LightSpec LightSpec::from_angles(double azimuth_deg, double elevation_deg, double intensity, const Vec3& tint,
                                 double ambient) {
  LightSpec l;
  l.azimuth = azimuth_deg;
  l.elevation = elevation_deg;
  l.dir = light_direction(azimuth_deg, elevation_deg);
  l.intensity = intensity;
  l.tint = tint;
  l.ambient = ambient;
  return l;
}

Vec3 tint_for_temperature(double kelvin) {
  // Approximate sRGB of a blackbody relative to a 6500 K white, brightest channel 1.
  static const double table[][4] = {{2500, 1.000, 0.624, 0.275}, {3500, 1.000, 0.769, 0.537},
                                    {4500, 1.000, 0.859, 0.729}, {5500, 1.000, 0.925, 0.878},
                                    {6500, 1.000, 1.000, 1.000}};
  constexpr int n = 5;
  if (kelvin <= table[0][0]) return {table[0][1], table[0][2], table[0][3]};
  if (kelvin >= table[n - 1][0]) return {table[n - 1][1], table[n - 1][2], table[n - 1][3]};
  int i = 0;
  while (table[i + 1][0] < kelvin) ++i;
  const double t = (kelvin - table[i][0]) / (table[i + 1][0] - table[i][0]);
  Vec3 out;
  for (int c = 0; c < 3; ++c) out[c] = table[i][c + 1] + t * (table[i + 1][c + 1] - table[i][c + 1]);
  return out;
}

RenderResult render_lambertian(const SceneDescriptor& scene, const LightSpec& light, std::int64_t size, bool clamp) {
  check(size > 0, "render_lambertian: size must be positive");
  const auto n = size;
  const auto plane = n * n;
  std::vector<float> img(static_cast<std::size_t>(3 * plane)), depth(static_cast<std::size_t>(plane)),
      normal(static_cast<std::size_t>(3 * plane));
  std::vector<int> object(static_cast<std::size_t>(plane), -1);
  const Vec3& l = light.dir;

  for (std::int64_t py = 0; py < n; ++py) {
    const double y = double(2 * py + 1 - n) / double(n);
    for (std::int64_t px = 0; px < n; ++px) {
      const double x = double(2 * px + 1 - n) / double(n);
      int hit = -1;
      double z = 0;
      for (std::size_t s = 0; s < scene.spheres.size(); ++s) {
        const auto& sp = scene.spheres[s];
        const double dx = x - sp.center[0], dy = y - sp.center[1];
        const double d2 = dx * dx + dy * dy, r2 = sp.radius * sp.radius;
        if (d2 >= r2) continue;
        const double zs = sp.center[2] + std::sqrt(r2 - d2);
        if (hit < 0 || zs > z) {
          hit = static_cast<int>(s);
          z = zs;
        }
      }
      Vec3 nrm{0, 0, 1};
      Vec3 albedo = scene.plane_albedo;
      if (hit >= 0) {
        const auto& sp = scene.spheres[static_cast<std::size_t>(hit)];
        nrm = {(x - sp.center[0]) / sp.radius, (y - sp.center[1]) / sp.radius, (z - sp.center[2]) / sp.radius};
        albedo = sp.albedo;
      } else {
        const double u = scene.stripe_dir[0] * x + scene.stripe_dir[1] * y;
        const double f =
            1.0 - scene.stripe_contrast * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * scene.stripe_freq * u));
        for (auto& a : albedo) a *= f;
      }
      double cosine = std::max(0.0, dot(nrm, l));
      if (cosine > 0) {
        const Vec3 p{x, y, z};
        for (std::size_t s = 0; s < scene.spheres.size(); ++s) {
          if (static_cast<int>(s) == hit) continue;
          const auto& sp = scene.spheres[s];
          const Vec3 oc{p[0] - sp.center[0], p[1] - sp.center[1], p[2] - sp.center[2]};
          const double b = dot(oc, l);
          const double c = dot(oc, oc) - sp.radius * sp.radius;
          const double disc = b * b - c;
          if (disc <= 0) continue;
          const double t = -b - std::sqrt(disc);
          if (t > 1e-9) {
            cosine = 0;
            break;
          }
        }
      }
      const auto i = static_cast<std::size_t>(py * n + px);
      for (int c = 0; c < 3; ++c) {
        double v = albedo[c] * (light.tint[c] * light.intensity * cosine + light.ambient);
        if (clamp) v = std::clamp(v, 0.0, 1.0);
        img[c * plane + i] = static_cast<float>(v);
        normal[c * plane + i] = static_cast<float>(nrm[c]);
      }
      depth[i] = static_cast<float>(kCameraZ - z);
      object[i] = hit;
    }
  }
  RenderResult r;
  r.image = Tensor({3, n, n}, std::move(img));
  r.depth = Tensor({1, n, n}, std::move(depth));
  r.normal = Tensor({3, n, n}, std::move(normal));
  r.object = std::move(object);
  return r;
}

SceneDescriptor mirror_scene(const SceneDescriptor& s) {
  SceneDescriptor m = s;
  for (auto& sp : m.spheres) sp.center[0] = -sp.center[0];
  m.stripe_dir[0] = -m.stripe_dir[0];
  return m;
}

LightSpec mirror_light(const LightSpec& l) {
  LightSpec m = l;
  m.dir[0] = -m.dir[0];
  m.azimuth = std::fmod(360.0 - l.azimuth, 360.0);
  if (m.azimuth < 0) m.azimuth += 360.0;
  return m;
}

SceneDescriptor random_scene(Rng& rng, const SceneRanges& r) {
  SceneDescriptor s;
  const int count = r.min_spheres + static_cast<int>(rng.below(static_cast<std::uint64_t>(r.max_spheres - r.min_spheres + 1)));
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Sphere sp;
      sp.radius = rng.uniform(r.min_radius, r.max_radius);
      sp.center = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), sp.radius};
      bool overlaps = false;
      for (const auto& o : s.spheres) {
        const double dx = o.center[0] - sp.center[0], dy = o.center[1] - sp.center[1];
        if (std::sqrt(dx * dx + dy * dy) < o.radius + sp.radius + 0.02) overlaps = true;
      }
      if (overlaps) continue;
      for (auto& a : sp.albedo) a = rng.uniform(r.min_albedo, r.max_albedo);
      s.spheres.push_back(sp);
      break;
    }
  }
  for (auto& a : s.plane_albedo) a = rng.uniform(0.4, 0.8);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  s.stripe_dir = {std::cos(theta), std::sin(theta)};
  s.stripe_freq = rng.uniform(1.5, 4.0);
  s.stripe_contrast = rng.uniform(0.15, 0.45);
  return s;
}

}  // namespace ian
