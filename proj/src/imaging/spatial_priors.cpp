#include "lnrel/spatial_priors.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lnrel {

namespace {

double normalize_axis(int c, int lo, int hi_inclusive) {
  if (hi_inclusive == lo) return 0.5;  // one-voxel-wide lung: no scale to normalise by
  const double t = static_cast<double>(c - lo) / static_cast<double>(hi_inclusive - lo);
  return std::clamp(t, 0.0, 1.0);
}

}  // namespace

std::pair<double, double> normalize_xy(int center_y, int center_x, const Box3& lung_bbox) {
  return {normalize_axis(center_y, lung_bbox.lo[1], lung_bbox.hi[1] - 1),
          normalize_axis(center_x, lung_bbox.lo[2], lung_bbox.hi[2] - 1)};
}

std::pair<double, double> normalize_xy(int center_y, int center_x, const BinaryMask& lung_mask) {
  return normalize_xy(center_y, center_x, foreground_bbox(lung_mask));
}

double normalize_z(int center_z, int extent_z) {
  if (extent_z < 2) throw std::invalid_argument("normalize_z: extent must be at least 2");
  return static_cast<double>(center_z) / static_cast<double>(extent_z - 1);
}

Angles tumor_angles(const Vec3& candidate_mm, const Vec3& tumor_centroid_mm) {
  const double dz = candidate_mm[0] - tumor_centroid_mm[0];
  const double dy = candidate_mm[1] - tumor_centroid_mm[1];
  const double dx = candidate_mm[2] - tumor_centroid_mm[2];
  const double r = std::sqrt(dz * dz + dy * dy + dx * dx);
  if (r == 0.0) return {};
  Angles angles;
  angles.elevation = std::asin(std::clamp(dz / r, -1.0, 1.0));
  angles.azimuth = std::atan2(dy, dx);
  if (angles.azimuth <= -std::numbers::pi) angles.azimuth = std::numbers::pi;
  return angles;
}

StudyGeometry study_geometry(const Study& study, DistanceMap tumor_dt) {
  StudyGeometry g;
  g.lung_bbox = foreground_bbox(study.lung_mask);
  g.tumor_centroid_mm = foreground_centroid_mm(study.tumor_mask);
  g.tumor_distance = std::move(tumor_dt);
  g.extent_z = study.shape()[0];
  g.spacing = study.spacing();
  return g;
}

StudyGeometry study_geometry(const Study& study) {
  return study_geometry(study, euclidean_distance_transform(study.tumor_mask));
}

SpatialPrior assemble_prior(const Candidate& candidate, const StudyGeometry& geometry) {
  const Index3& c = candidate.center;
  const Vec3 center_mm{c[0] * geometry.spacing[0], c[1] * geometry.spacing[1], c[2] * geometry.spacing[2]};
  SpatialPrior prior;
  std::tie(prior.y_norm, prior.x_norm) = normalize_xy(c[1], c[2], geometry.lung_bbox);
  prior.z_norm = normalize_z(c[0], geometry.extent_z);
  prior.tumor_dist = distance_to_mask(center_mm, geometry.tumor_distance) / kTumorDistanceScaleMm;
  const Angles angles = tumor_angles(center_mm, geometry.tumor_centroid_mm);
  prior.elevation = angles.elevation;
  prior.azimuth = angles.azimuth;
  return prior;
}

SpatialPrior assemble_prior(const Candidate& candidate, const Study& study, const DistanceMap& tumor_dt) {
  return assemble_prior(candidate, study_geometry(study, tumor_dt));
}

}  // namespace lnrel
