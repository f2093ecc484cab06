#pragma once

// Order-2 real spherical harmonics and clamped-cosine irradiance.
//
// Coefficient order: Y00; Y1-1, Y10, Y11; Y2-2, Y2-1, Y20, Y21, Y22.

#include <array>
#include <functional>

namespace ian {

using Vec3 = std::array<double, 3>;

inline constexpr int kShCoeffs = 9;
inline constexpr const char* kShOrder = "Y00,Y1-1,Y10,Y11,Y2-2,Y2-1,Y20,Y21,Y22";

struct SHLight {
  std::array<double, kShCoeffs> c{};
  bool operator==(const SHLight&) const = default;
};

/// The nine basis functions at unit direction n.
std::array<double, kShCoeffs> sh_basis(const Vec3& n);

/// Irradiance coefficients of a directional light of the given intensity
/// (band factors pi, 2pi/3, pi/4).
SHLight sh_from_direction(const Vec3& dir, double intensity = 1.0);

/// Reconstructed irradiance sum_k c_k Y_k(n).
double sh_irradiance(const SHLight& l, const Vec3& n);

/// Projects `fn` onto the basis by equal-weight quadrature over a Fibonacci
/// sphere of `samples` points. Rejects fewer than 1000 samples.
SHLight sh_numeric_oracle(const std::function<double(const Vec3&)>& fn, int samples);

/// i-th of n quasi-uniform unit vectors.
Vec3 fibonacci_direction(int i, int n);

Vec3 normalized(const Vec3& v);
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

}  // namespace ian
