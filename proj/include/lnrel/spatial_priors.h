#pragma once

#include <array>
#include <utility>

#include "lnrel/distance_transform.h"
#include "lnrel/study.h"

namespace lnrel {

inline constexpr std::size_t kSpatialPriorWidth = 6;
// tumor_dist is reported in units of 100 mm.
inline constexpr double kTumorDistanceScaleMm = 100.0;

struct SpatialPrior {
  double x_norm = 0.0;
  double y_norm = 0.0;
  double z_norm = 0.0;
  double tumor_dist = 0.0;
  double elevation = 0.0;  // [-pi/2, pi/2]
  double azimuth = 0.0;    // (-pi, pi]

  // (x_norm, y_norm, z_norm, tumor_dist, elevation, azimuth)
  std::array<double, kSpatialPriorWidth> as_array() const {
    return {x_norm, y_norm, z_norm, tumor_dist, elevation, azimuth};
  }
};

struct Angles {
  double elevation = 0.0;
  double azimuth = 0.0;
};

// Maps the lung bbox extremes to 0 and 1 per axis and clamps outside values.
// Returns (y_norm, x_norm).
std::pair<double, double> normalize_xy(int center_y, int center_x, const BinaryMask& lung_mask);
std::pair<double, double> normalize_xy(int center_y, int center_x, const Box3& lung_bbox);

// z / (extent - 1); extent must be at least 2.
double normalize_z(int center_z, int extent_z);

// Angles of (candidate - centroid); both zero when the points coincide.
Angles tumor_angles(const Vec3& candidate_mm, const Vec3& tumor_centroid_mm);

// Per-study quantities shared by every candidate's prior.
struct StudyGeometry {
  Box3 lung_bbox;
  Vec3 tumor_centroid_mm{};
  DistanceMap tumor_distance;
  int extent_z = 0;
  Vec3 spacing{};
};

StudyGeometry study_geometry(const Study& study);
StudyGeometry study_geometry(const Study& study, DistanceMap tumor_dt);

SpatialPrior assemble_prior(const Candidate& candidate, const StudyGeometry& geometry);
SpatialPrior assemble_prior(const Candidate& candidate, const Study& study, const DistanceMap& tumor_dt);

}  // namespace lnrel
