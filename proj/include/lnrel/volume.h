#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lnrel/geometry.h"

namespace lnrel {

inline std::size_t voxel_count(const Index3& shape) {
  return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
}

// Dense (z, y, x) grid, x fastest.
template <typename T>
struct Grid3 {
  Index3 shape{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};  // mm per voxel, (sz, sy, sx)
  std::vector<T> values;

  Grid3() = default;
  Grid3(Index3 shape_, Vec3 spacing_, T fill = T{})
      : shape(shape_), spacing(spacing_), values(voxel_count(shape_), fill) {
    for (int a = 0; a < 3; ++a) {
      if (shape[a] <= 0) throw std::invalid_argument("grid extents must be positive");
      if (!(spacing[a] > 0.0)) throw std::invalid_argument("grid spacing must be positive");
    }
  }

  std::size_t offset(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * shape[1] + y) * shape[2] + x;
  }
  std::size_t offset(const Index3& p) const { return offset(p[0], p[1], p[2]); }
  bool in_bounds(int z, int y, int x) const {
    return z >= 0 && y >= 0 && x >= 0 && z < shape[0] && y < shape[1] && x < shape[2];
  }
  bool in_bounds(const Index3& p) const { return in_bounds(p[0], p[1], p[2]); }

  T& at(int z, int y, int x) { return values[offset(z, y, x)]; }
  const T& at(int z, int y, int x) const { return values[offset(z, y, x)]; }
  T& operator[](const Index3& p) { return values[offset(p)]; }
  const T& operator[](const Index3& p) const { return values[offset(p)]; }

  bool operator==(const Grid3&) const = default;
};

// CT in Hounsfield units, PET in uptake units.
using Volume3D = Grid3<float>;
// Nonzero voxels are foreground.
using BinaryMask = Grid3<std::uint8_t>;
// Millimetres, non-negative.
using DistanceMap = Grid3<double>;

std::size_t foreground_count(const BinaryMask& mask);
// Tight bounding box of the foreground; throws on an empty mask.
Box3 foreground_bbox(const BinaryMask& mask);
// Mean foreground voxel position in mm; throws on an empty mask.
Vec3 foreground_centroid_mm(const BinaryMask& mask);

}  // namespace lnrel
