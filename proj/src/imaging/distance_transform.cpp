#include "lnrel/distance_transform.h"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lnrel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// True when the middle site v can never be the closest of (u, v, w) anywhere
// on the line, so it can be dropped from the envelope.
bool remove_middle(double du, double dv, double dw, double u, double v, double w) {
  const double a = v - u;
  const double b = w - v;
  const double c = w - u;
  return c * dv - b * du - a * dw - a * b * c > 0.0;
}

// In-place squared-distance sweep along one scanline. `line` holds squared
// distances from earlier axes (inf = no site); positions are i * spacing.
void voronoi_line(std::vector<double>& line, double spacing, std::vector<double>& site_g,
                  std::vector<double>& site_pos) {
  const std::size_t n = line.size();
  site_g.clear();
  site_pos.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (line[i] == kInf) continue;
    const double pos = static_cast<double>(i) * spacing;
    while (site_g.size() >= 2) {
      const std::size_t l = site_g.size();
      if (!remove_middle(site_g[l - 2], site_g[l - 1], line[i], site_pos[l - 2], site_pos[l - 1], pos)) break;
      site_g.pop_back();
      site_pos.pop_back();
    }
    site_g.push_back(line[i]);
    site_pos.push_back(pos);
  }
  if (site_g.empty()) return;
  std::size_t l = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * spacing;
    auto cost = [&](std::size_t s) {
      const double d = site_pos[s] - pos;
      return site_g[s] + d * d;
    };
    while (l + 1 < site_g.size() && cost(l) > cost(l + 1)) ++l;
    line[i] = cost(l);
  }
}

}  // namespace

DistanceMap euclidean_distance_transform(const BinaryMask& mask) {
  DistanceMap map(mask.shape, mask.spacing, kInf);
  bool any = false;
  for (std::size_t i = 0; i < mask.values.size(); ++i) {
    if (mask.values[i]) {
      map.values[i] = 0.0;
      any = true;
    }
  }
  if (!any) throw EmptyMaskError("distance transform of an empty mask is undefined");

  const Index3& shape = mask.shape;
  std::vector<double> line, site_g, site_pos;
  // axis 2 (x), then 1 (y), then 0 (z); each pass sees the squared distances
  // of the previous ones.
  for (int axis = 2; axis >= 0; --axis) {
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    line.resize(shape[axis]);
    for (int i1 = 0; i1 < shape[a1]; ++i1) {
      for (int i2 = 0; i2 < shape[a2]; ++i2) {
        Index3 p{};
        p[a1] = i1;
        p[a2] = i2;
        for (int k = 0; k < shape[axis]; ++k) {
          p[axis] = k;
          line[k] = map[p];
        }
        voronoi_line(line, mask.spacing[axis], site_g, site_pos);
        for (int k = 0; k < shape[axis]; ++k) {
          p[axis] = k;
          map[p] = line[k];
        }
      }
    }
  }
  for (double& v : map.values) v = std::sqrt(v);
  return map;
}

double distance_to_mask(const Vec3& point_mm, const DistanceMap& map) {
  Index3 voxel{};
  for (int a = 0; a < 3; ++a) {
    const double idx = std::round(point_mm[a] / map.spacing[a]);
    if (!std::isfinite(idx) || idx < 0.0 || idx >= static_cast<double>(map.shape[a])) {
      throw std::out_of_range("point (" + std::to_string(point_mm[0]) + ", " + std::to_string(point_mm[1]) +
                              ", " + std::to_string(point_mm[2]) + ") mm lies outside the distance map");
    }
    voxel[a] = static_cast<int>(idx);
  }
  return map[voxel];
}

}  // namespace lnrel
