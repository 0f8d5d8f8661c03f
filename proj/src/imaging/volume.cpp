#include "lnrel/volume.h"

#include <algorithm>
#include <limits>

#include "lnrel/distance_transform.h"

namespace lnrel {

std::size_t foreground_count(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.values.begin(), mask.values.end(), [](std::uint8_t v) { return v != 0; }));
}

Box3 foreground_bbox(const BinaryMask& mask) {
  constexpr int kMax = std::numeric_limits<int>::max();
  Box3 box{{kMax, kMax, kMax}, {-1, -1, -1}};
  for (int z = 0; z < mask.shape[0]; ++z) {
    for (int y = 0; y < mask.shape[1]; ++y) {
      for (int x = 0; x < mask.shape[2]; ++x) {
        if (!mask.at(z, y, x)) continue;
        const Index3 p{z, y, x};
        for (int a = 0; a < 3; ++a) {
          box.lo[a] = std::min(box.lo[a], p[a]);
          box.hi[a] = std::max(box.hi[a], p[a] + 1);
        }
      }
    }
  }
  if (box.hi[0] < 0) throw EmptyMaskError("mask has no foreground voxels");
  return box;
}

Vec3 foreground_centroid_mm(const BinaryMask& mask) {
  double acc[3] = {0.0, 0.0, 0.0};
  std::size_t n = 0;
  for (int z = 0; z < mask.shape[0]; ++z) {
    for (int y = 0; y < mask.shape[1]; ++y) {
      for (int x = 0; x < mask.shape[2]; ++x) {
        if (!mask.at(z, y, x)) continue;
        acc[0] += z;
        acc[1] += y;
        acc[2] += x;
        ++n;
      }
    }
  }
  if (n == 0) throw EmptyMaskError("mask has no foreground voxels");
  return {acc[0] / n * mask.spacing[0], acc[1] / n * mask.spacing[1], acc[2] / n * mask.spacing[2]};
}

}  // namespace lnrel
