#pragma once

#include <stdexcept>

#include "lnrel/volume.h"

namespace lnrel {

class EmptyMaskError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Exact Euclidean distance (mm, honouring anisotropic spacing) from every
// voxel centre to the nearest foreground voxel centre; foreground maps to 0.
//
// Separable: one Voronoi lower-envelope sweep per axis over squared
// distances, linear in the voxel count per axis.
DistanceMap euclidean_distance_transform(const BinaryMask& mask);

// Value at the voxel nearest to point_mm (z, y, x); no interpolation.
double distance_to_mask(const Vec3& point_mm, const DistanceMap& map);

}  // namespace lnrel
