#include "ian/sh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ian/common.hpp"

namespace ian {

namespace {
constexpr double kPi = std::numbers::pi;
const double k0 = 0.5 * std::sqrt(1.0 / kPi);
const double k1 = std::sqrt(3.0 / (4.0 * kPi));
const double k2 = 0.5 * std::sqrt(15.0 / kPi);
const double k20 = 0.25 * std::sqrt(5.0 / kPi);
const double k22 = 0.25 * std::sqrt(15.0 / kPi);
}  // namespace

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  check(n > 0 && std::isfinite(n), "normalized: zero or non-finite vector");
  return {v[0] / n, v[1] / n, v[2] / n};
}

std::array<double, kShCoeffs> sh_basis(const Vec3& n) {
  const double x = n[0], y = n[1], z = n[2];
  return {k0,          k1 * y,     k1 * z,  k1 * x, k2 * x * y, k2 * y * z, k20 * (3 * z * z - 1),
          k2 * x * z,  k22 * (x * x - y * y)};
}

SHLight sh_from_direction(const Vec3& dir, double intensity) {
  const double len = std::sqrt(dot(dir, dir));
  check(len > 0, "sh_from_direction: zero direction");
  const auto y = sh_basis(normalized(dir));
  const double band[3] = {kPi, 2.0 * kPi / 3.0, kPi / 4.0};
  SHLight l;
  for (int k = 0; k < kShCoeffs; ++k) l.c[k] = band[k == 0 ? 0 : (k < 4 ? 1 : 2)] * intensity * y[k];
  return l;
}

double sh_irradiance(const SHLight& l, const Vec3& n) {
  const auto y = sh_basis(n);
  double e = 0;
  for (int k = 0; k < kShCoeffs; ++k) e += l.c[k] * y[k];
  return e;
}

Vec3 fibonacci_direction(int i, int n) {
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  const double z = 1.0 - (2.0 * i + 1.0) / n;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = golden * i;
  return {r * std::cos(phi), r * std::sin(phi), z};
}

SHLight sh_numeric_oracle(const std::function<double(const Vec3&)>& fn, int samples) {
  check(samples >= 1000, "sh_numeric_oracle: at least 1000 samples required, got " + std::to_string(samples));
  SHLight l;
  const double w = 4.0 * kPi / samples;
  for (int i = 0; i < samples; ++i) {
    const auto d = fibonacci_direction(i, samples);
    const double v = fn(d);
    const auto y = sh_basis(d);
    for (int k = 0; k < kShCoeffs; ++k) l.c[k] += w * v * y[k];
  }
  return l;
}

}  // namespace ian
