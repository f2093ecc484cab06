#pragma once

// Analytic Lambertian scenes: spheres resting over a textured ground plane,
// seen by an orthographic camera at z = 2 looking down -z.
//
// World x runs left to right and y top to bottom across the image, both
// spanning [-1, 1]; pixel centres sit at (2p + 1 - W) / W. Depth is the
// distance from the camera plane (ground plane depth 2).

#include <array>
#include <vector>

#include "ian/random.hpp"
#include "ian/sh.hpp"
#include "ian/tensor.hpp"

namespace ian {

inline constexpr double kCameraZ = 2.0;

struct Sphere {
  Vec3 center{};
  double radius = 0.3;
  Vec3 albedo{0.7, 0.7, 0.7};
  bool operator==(const Sphere&) const = default;
};

struct SceneDescriptor {
  std::vector<Sphere> spheres;
  Vec3 plane_albedo{0.6, 0.6, 0.6};
  // Stripes along (stripe_dir . (x, y)) with this frequency; factor in [1-contrast, 1].
  std::array<double, 2> stripe_dir{1.0, 0.0};
  double stripe_freq = 4.0;
  double stripe_contrast = 0.0;
  bool operator==(const SceneDescriptor&) const = default;
};

/// Azimuth measured clockwise from image north: 0 = N (towards -y), 90 = E
/// (towards +x), 270 = W.
Vec3 light_direction(double azimuth_deg, double elevation_deg);

struct LightSpec {
  Vec3 dir{0, 0, 1};  // unit vector towards the light
  double azimuth = 0;
  double elevation = 90;
  double intensity = 1.0;
  Vec3 tint{1, 1, 1};
  double ambient = 0.1;

  static LightSpec from_angles(double azimuth_deg, double elevation_deg, double intensity, const Vec3& tint,
                               double ambient);
  SHLight sh() const { return sh_from_direction(dir, intensity); }
  bool operator==(const LightSpec&) const = default;
};

/// Approximate RGB tint of a colour temperature (relative to 6500 K white).
Vec3 tint_for_temperature(double kelvin);

struct RenderResult {
  Tensor image;   // [3,H,W]
  Tensor depth;   // [1,H,W], world units
  Tensor normal;  // [3,H,W], analytic unit normals (towards the camera)
  std::vector<int> object;  // per pixel: -1 plane, else sphere index
};

/// image = albedo * (tint * intensity * max(0, n.l) * visibility + ambient);
/// clamped to [0,1] unless `clamp` is false.
RenderResult render_lambertian(const SceneDescriptor& scene, const LightSpec& light, std::int64_t size,
                               bool clamp = true);

/// Mirror about the vertical image axis.
SceneDescriptor mirror_scene(const SceneDescriptor& s);
LightSpec mirror_light(const LightSpec& l);

struct SceneRanges {
  int min_spheres = 2;
  int max_spheres = 4;
  double min_radius = 0.18;
  double max_radius = 0.42;
  double min_albedo = 0.25;
  double max_albedo = 0.9;
  bool operator==(const SceneRanges&) const = default;
};

SceneDescriptor random_scene(Rng& rng, const SceneRanges& ranges = {});

}  // namespace ian
