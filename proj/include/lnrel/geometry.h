#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace lnrel {

// Voxel index triple, always ordered (z, y, x).
using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

// Half-open integer box [lo, hi) in (z, y, x).
struct Box3 {
  Index3 lo{0, 0, 0};
  Index3 hi{0, 0, 0};

  bool empty() const { return hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]; }
  int extent(int axis) const { return hi[axis] - lo[axis]; }
  std::int64_t volume() const {
    return empty() ? 0 : std::int64_t{extent(0)} * extent(1) * extent(2);
  }
  bool contains(const Index3& p) const {
    for (int a = 0; a < 3; ++a) {
      if (p[a] < lo[a] || p[a] >= hi[a]) return false;
    }
    return true;
  }
  bool inside(const Index3& shape) const {
    for (int a = 0; a < 3; ++a) {
      if (lo[a] < 0 || hi[a] > shape[a]) return false;
    }
    return true;
  }
  bool operator==(const Box3&) const = default;
};

std::string to_string(const Box3& box);

}  // namespace lnrel
