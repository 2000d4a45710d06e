#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string_view>

namespace roomest {

using Vec3 = std::array<double, 3>;

enum class Axis : std::size_t { kX = 0, kY = 1, kZ = 2 };

constexpr std::array<Axis, 3> kAxes{Axis::kX, Axis::kY, Axis::kZ};

constexpr std::size_t index_of(Axis a) { return static_cast<std::size_t>(a); }

constexpr std::string_view axis_name(Axis a) {
  switch (a) {
    case Axis::kX: return "x";
    case Axis::kY: return "y";
    case Axis::kZ: return "z";
  }
  return "?";
}

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace roomest
