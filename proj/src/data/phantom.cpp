#include "lnrel/phantom.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "lnrel/nn.h"

namespace lnrel {

namespace {

constexpr double kMarginMm = 6.0;
constexpr std::uint64_t kRenderStream = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng, double mean, double sd) { return std::normal_distribution<double>(mean, sd)(rng); }
bool bernoulli(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 scaled(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }
Vec3 normalized(const Vec3& a) { return scaled(a, 1.0 / norm(a)); }

Vec3 random_direction(Rng& rng) {
  Vec3 d;
  do {
    d = {normal(rng, 0, 1), normal(rng, 0, 1), normal(rng, 0, 1)};
  } while (norm(d) < 1e-6);
  return normalized(d);
}

int count_draw(Rng& rng, double mean, double sd, int minimum) {
  const double v = sd > 0.0 ? normal(rng, mean, sd) : mean;
  return std::max(minimum, static_cast<int>(std::lround(v)));
}

Vec3 extent_mm(const PhantomConfig& c) {
  return {c.volume_shape[0] * c.spacing[0], c.volume_shape[1] * c.spacing[1], c.volume_shape[2] * c.spacing[2]};
}

Index3 to_voxel(const Vec3& mm, const PhantomConfig& c) {
  Index3 v;
  for (int a = 0; a < 3; ++a) {
    v[a] = std::clamp(static_cast<int>(std::lround(mm[a] / c.spacing[a])), 0, c.volume_shape[a] - 1);
  }
  return v;
}

Box3 bbox_of(const Vec3& lo_mm, const Vec3& hi_mm, const Index3& center, const PhantomConfig& c) {
  Box3 box;
  for (int a = 0; a < 3; ++a) {
    box.lo[a] = std::clamp(static_cast<int>(std::floor(lo_mm[a] / c.spacing[a] + 0.5)), 0, c.volume_shape[a] - 1);
    box.hi[a] = std::clamp(static_cast<int>(std::floor(hi_mm[a] / c.spacing[a] + 0.5)) + 1, 1, c.volume_shape[a]);
    box.lo[a] = std::min(box.lo[a], center[a]);
    box.hi[a] = std::max(box.hi[a], center[a] + 1);
  }
  return box;
}

// Keeps a walking point inside the margin box by mirroring position and
// direction at the walls.
void reflect_inside(Vec3& pos, Vec3& dir, const Vec3& extent) {
  for (int a = 0; a < 3; ++a) {
    const double lo = std::min(kMarginMm, extent[a] / 2);
    const double hi = std::max(extent[a] - kMarginMm, extent[a] / 2);
    for (int guard = 0; guard < 4 && (pos[a] < lo || pos[a] > hi); ++guard) {
      if (pos[a] < lo) pos[a] = 2 * lo - pos[a];
      if (pos[a] > hi) pos[a] = 2 * hi - pos[a];
      dir[a] = -dir[a];
    }
    pos[a] = std::clamp(pos[a], lo, hi);
  }
}

// Squared distance from p to segment [a, b].
double segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const Vec3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = len2 > 0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = ap[i] - t * ab[i];
    d2 += d * d;
  }
  return d2;
}

struct Anatomy {
  Vec3 extent;
  Vec3 body_center;  // y, x used
  double body_ry, body_rx;
  Vec3 lung_center[2];
  Vec3 lung_radii;

  explicit Anatomy(const PhantomConfig& c) : extent(extent_mm(c)) {
    body_center = {extent[0] / 2, extent[1] / 2, extent[2] / 2};
    body_ry = 0.46 * extent[1];
    body_rx = 0.48 * extent[2];
    lung_radii = {0.45 * extent[0], 0.28 * extent[1], 0.17 * extent[2]};
    lung_center[0] = {0.5 * extent[0], 0.46 * extent[1], 0.26 * extent[2]};
    lung_center[1] = {0.5 * extent[0], 0.46 * extent[1], 0.74 * extent[2]};
  }
  bool in_body(const Vec3& p) const {
    const double dy = (p[1] - body_center[1]) / body_ry;
    const double dx = (p[2] - body_center[2]) / body_rx;
    return dy * dy + dx * dx <= 1.0;
  }
  bool in_lung(const Vec3& p) const {
    for (const Vec3& c : lung_center) {
      double q = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double d = (p[a] - c[a]) / lung_radii[a];
        q += d * d;
      }
      if (q <= 1.0) return in_body(p);
    }
    return false;
  }
};

}  // namespace

void PhantomConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (volume_shape[a] < 8) throw std::invalid_argument("phantom: every volume extent must be at least 8 voxels");
    if (!(spacing[a] > 0.0)) throw std::invalid_argument("phantom: spacing must be positive");
  }
  if (studies < 1) throw std::invalid_argument("phantom: studies must be positive");
  if (pathway_count < 1) throw std::invalid_argument("phantom: pathway_count must be positive");
  if (!(label_correlation >= 0.0 && label_correlation <= 1.0)) {
    throw std::invalid_argument("phantom: label_correlation must lie in [0, 1]");
  }
  if (!(pathway_positive_rate > 0.0 && pathway_positive_rate < 1.0)) {
    throw std::invalid_argument("phantom: pathway_positive_rate must lie in (0, 1)");
  }
  if (!(candidates_per_study > 1.0) || !(fp_per_study > 0.0) || fp_per_study >= candidates_per_study) {
    throw std::invalid_argument("phantom: need candidates_per_study > fp_per_study > 0");
  }
  const double true_mean = candidates_per_study - fp_per_study;
  const double pathway_negatives = true_mean / pathway_positive_rate - true_mean;
  if (pathway_negatives > fp_per_study) {
    throw std::invalid_argument("phantom: fp_per_study is below the pathway negatives implied by pathway_positive_rate");
  }
  if (candidates_spread < 0.0 || ct_noise_hu < 0.0 || pet_noise < 0.0 || uptake_spread < 0.0) {
    throw std::invalid_argument("phantom: spreads and noise levels must be non-negative");
  }
}

std::uint64_t study_seed(std::uint64_t base_seed, int index) {
  return splitmix64(splitmix64(base_seed) ^ static_cast<std::uint64_t>(index));
}

PhantomLayout sample_layout(const PhantomConfig& config, int index) {
  config.validate();
  PhantomLayout layout;
  layout.seed = study_seed(config.seed, index);
  Rng rng(layout.seed);
  const Vec3 ext = extent_mm(config);

  layout.uptake_factor = std::exp(normal(rng, 0.0, config.uptake_spread));
  layout.tumor_center_mm = {uniform(rng, 0.35, 0.65) * ext[0], uniform(rng, 0.42, 0.56) * ext[1],
                            uniform(rng, 0.44, 0.56) * ext[2]};
  layout.tumor_radii_mm = {std::min(uniform(rng, 5.0, 9.0), 0.15 * ext[0]),
                           std::min(uniform(rng, 4.0, 7.0), 0.15 * ext[1]),
                           std::min(uniform(rng, 4.0, 7.0), 0.15 * ext[2])};
  const double tumor_reach = *std::max_element(layout.tumor_radii_mm.begin(), layout.tumor_radii_mm.end());

  // Split the count spread between pathway sites and off-pathway tubes so the
  // total keeps the configured standard deviation.
  const double true_mean = config.candidates_per_study - config.fp_per_study;
  const double site_mean = true_mean / config.pathway_positive_rate;
  const double off_mean = config.candidates_per_study - site_mean;
  const double site_sd = config.candidates_spread * std::sqrt(site_mean / config.candidates_per_study);
  const double off_sd = config.candidates_spread * std::sqrt(std::max(off_mean, 0.0) / config.candidates_per_study);
  const int sites = count_draw(rng, site_mean, site_sd, 1);
  const int off_sites = off_mean > 0.0 ? count_draw(rng, off_mean, off_sd, 0) : 0;

  const double pi = config.pathway_positive_rate;
  for (int p = 0; p < config.pathway_count; ++p) {
    const int on_path = sites / config.pathway_count + (p < sites % config.pathway_count ? 1 : 0);
    if (on_path == 0) continue;
    const double elevation = (bernoulli(rng, 0.5) ? 1.0 : -1.0) * uniform(rng, 0.3, 1.2);
    const double azimuth = uniform(rng, -std::numbers::pi, std::numbers::pi);
    Vec3 dir{std::sin(elevation), std::cos(elevation) * std::sin(azimuth), std::cos(elevation) * std::cos(azimuth)};
    Vec3 pos = add(layout.tumor_center_mm, scaled(dir, tumor_reach + uniform(rng, 4.0, 8.0)));
    bool previous = bernoulli(rng, pi);
    for (int k = 0; k < on_path; ++k) {
      if (k > 0) {
        dir = normalized(add(dir, {normal(rng, 0, 0.15), normal(rng, 0, 0.15), normal(rng, 0, 0.15)}));
        pos = add(pos, scaled(dir, uniform(rng, 8.0, 12.0)));
      }
      Vec3 site = add(pos, {normal(rng, 0, 1.5), normal(rng, 0, 1.5), normal(rng, 0, 1.5)});
      reflect_inside(site, dir, ext);
      pos = site;

      bool label = previous;
      if (k > 0 && !bernoulli(rng, config.label_correlation)) label = bernoulli(rng, pi);
      previous = label;

      PhantomNode node;
      node.center_mm = site;
      const double base = label ? uniform(rng, 3.0, 5.0) : uniform(rng, 2.5, 4.5);
      for (int a = 0; a < 3; ++a) node.radii_mm[a] = base * uniform(rng, 0.8, 1.2);
      double tumor_gap = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double d = site[a] - layout.tumor_center_mm[a];
        tumor_gap += d * d;
      }
      tumor_gap = std::sqrt(tumor_gap);
      const double jitter = std::exp(normal(rng, 0.0, 0.2));
      node.uptake = layout.uptake_factor * jitter *
                    (label ? 2.0 + 1.0 * std::exp(-tumor_gap / 60.0) : 1.4);
      node.ct_hu = label ? 35.0 : 42.0;
      node.ct_texture_hu = label ? 15.0 : 10.0;
      node.order_on_pathway = k;
      node.candidate.label = label ? CandidateLabel::true_node : CandidateLabel::false_positive;
      node.candidate.pathway_id = p;
      node.candidate.center = to_voxel(site, config);
      Vec3 lo, hi;
      for (int a = 0; a < 3; ++a) {
        lo[a] = site[a] - node.radii_mm[a];
        hi[a] = site[a] + node.radii_mm[a];
      }
      node.candidate.bbox = bbox_of(lo, hi, node.candidate.center, config);
      layout.nodes.push_back(node);
    }
  }

  const Anatomy anatomy(config);
  for (int i = 0; i < off_sites; ++i) {
    PhantomNode tube;
    Vec3 c{};
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (int a = 0; a < 3; ++a) {
        const double lo = std::min(kMarginMm, ext[a] / 2);
        c[a] = uniform(rng, lo, std::max(lo, ext[a] - lo));
      }
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) d2 += std::pow(c[a] - layout.tumor_center_mm[a], 2);
      if (anatomy.in_body(c) && std::sqrt(d2) > tumor_reach + 8.0) break;
    }
    tube.center_mm = c;
    tube.axis = random_direction(rng);
    tube.length_mm = uniform(rng, 14.0, 30.0);
    const double radius = uniform(rng, 1.5, 3.0);
    tube.radii_mm = {radius, radius, radius};
    tube.uptake = layout.uptake_factor * uniform(rng, 0.6, 1.6);
    tube.ct_hu = 40.0;
    tube.ct_texture_hu = 5.0;
    tube.candidate.label = CandidateLabel::false_positive;
    tube.candidate.center = to_voxel(c, config);
    const Vec3 a = add(c, scaled(tube.axis, -tube.length_mm / 2));
    const Vec3 b = add(c, scaled(tube.axis, tube.length_mm / 2));
    Vec3 lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(a[k], b[k]) - radius;
      hi[k] = std::max(a[k], b[k]) + radius;
    }
    tube.candidate.bbox = bbox_of(lo, hi, tube.candidate.center, config);
    layout.nodes.push_back(tube);
  }
  return layout;
}

Study render_study(const PhantomConfig& config, const PhantomLayout& layout, int index) {
  const Index3& shape = config.volume_shape;
  const Vec3& sp = config.spacing;
  Study study;
  char id[32];
  std::snprintf(id, sizeof id, "study_%04d", index);
  study.study_id = id;
  study.seed = layout.seed;
  study.ct = Volume3D(shape, sp, -1000.0f);
  study.pet = Volume3D(shape, sp, 0.0f);
  study.tumor_mask = BinaryMask(shape, sp, 0);
  study.lung_mask = BinaryMask(shape, sp, 0);

  const Anatomy anatomy(config);
  std::vector<double> ct(voxel_count(shape)), pet(voxel_count(shape));
  std::vector<std::uint8_t> body(voxel_count(shape), 0);
  for (int z = 0; z < shape[0]; ++z) {
    for (int y = 0; y < shape[1]; ++y) {
      for (int x = 0; x < shape[2]; ++x) {
        const Vec3 p{z * sp[0], y * sp[1], x * sp[2]};
        const std::size_t o = study.ct.offset(z, y, x);
        if (!anatomy.in_body(p)) {
          ct[o] = -1000.0;
          pet[o] = 0.0;
          continue;
        }
        body[o] = 1;
        if (anatomy.in_lung(p)) {
          study.lung_mask.values[o] = 1;
          ct[o] = -850.0;
          pet[o] = 0.25;
        } else {
          ct[o] = 20.0;
          pet[o] = 0.6;
        }
      }
    }
  }

  Rng rng(layout.seed ^ kRenderStream);
  auto voxel_box = [&](const Vec3& lo, const Vec3& hi) {
    Box3 b;
    for (int a = 0; a < 3; ++a) {
      b.lo[a] = std::clamp(static_cast<int>(std::floor(lo[a] / sp[a])), 0, shape[a]);
      b.hi[a] = std::clamp(static_cast<int>(std::ceil(hi[a] / sp[a])) + 1, 0, shape[a]);
    }
    return b;
  };

  {
    const Vec3& c = layout.tumor_center_mm;
    const Vec3& r = layout.tumor_radii_mm;
    const Box3 b = voxel_box({c[0] - r[0], c[1] - r[1], c[2] - r[2]}, {c[0] + r[0], c[1] + r[1], c[2] + r[2]});
    for (int z = b.lo[0]; z < b.hi[0]; ++z) {
      for (int y = b.lo[1]; y < b.hi[1]; ++y) {
        for (int x = b.lo[2]; x < b.hi[2]; ++x) {
          const double q = std::pow((z * sp[0] - c[0]) / r[0], 2) + std::pow((y * sp[1] - c[1]) / r[1], 2) +
                           std::pow((x * sp[2] - c[2]) / r[2], 2);
          if (q > 1.0) continue;
          const std::size_t o = study.ct.offset(z, y, x);
          study.tumor_mask.values[o] = 1;
          study.lung_mask.values[o] = 0;
          ct[o] = 45.0 + normal(rng, 0.0, 10.0);
          pet[o] = 6.0;
        }
      }
    }
    // A tumour smaller than one voxel still owns its centre voxel.
    const Index3 cv = to_voxel(c, config);
    if (!study.tumor_mask[cv]) {
      study.tumor_mask[cv] = 1;
      study.lung_mask[cv] = 0;
    }
  }

  for (const PhantomNode& node : layout.nodes) {
    const bool tube = node.length_mm > 0.0;
    const Vec3 a = tube ? add(node.center_mm, scaled(node.axis, -node.length_mm / 2)) : node.center_mm;
    const Vec3 b = tube ? add(node.center_mm, scaled(node.axis, node.length_mm / 2)) : node.center_mm;
    Vec3 sigma;
    for (int k = 0; k < 3; ++k) sigma[k] = 0.6 * node.radii_mm[k] + 1.0;
    Vec3 lo, hi;
    for (int k = 0; k < 3; ++k) {
      const double reach = std::max(node.radii_mm[k], 3.0 * sigma[k]);
      lo[k] = std::min(a[k], b[k]) - reach;
      hi[k] = std::max(a[k], b[k]) + reach;
    }
    const Box3 box = voxel_box(lo, hi);
    for (int z = box.lo[0]; z < box.hi[0]; ++z) {
      for (int y = box.lo[1]; y < box.hi[1]; ++y) {
        for (int x = box.lo[2]; x < box.hi[2]; ++x) {
          const Vec3 p{z * sp[0], y * sp[1], x * sp[2]};
          const std::size_t o = study.ct.offset(z, y, x);
          double inside_q, blob_q;
          if (tube) {
            const double d2 = segment_distance2(p, a, b);
            inside_q = d2 / (node.radii_mm[0] * node.radii_mm[0]);
            blob_q = d2 / (sigma[0] * sigma[0]);
          } else {
            inside_q = 0.0;
            blob_q = 0.0;
            for (int k = 0; k < 3; ++k) {
              const double d = p[k] - node.center_mm[k];
              inside_q += d * d / (node.radii_mm[k] * node.radii_mm[k]);
              blob_q += d * d / (sigma[k] * sigma[k]);
            }
          }
          if (inside_q <= 1.0) ct[o] = node.ct_hu + normal(rng, 0.0, node.ct_texture_hu);
          if (blob_q <= 9.0) pet[o] += node.uptake * std::exp(-0.5 * blob_q);
        }
      }
    }
  }

  for (std::size_t o = 0; o < ct.size(); ++o) {
    if (body[o]) {
      ct[o] += normal(rng, 0.0, config.ct_noise_hu);
      pet[o] += normal(rng, 0.0, config.pet_noise);
    }
    study.ct.values[o] = static_cast<float>(std::clamp(ct[o], -1000.0, 1000.0));
    study.pet.values[o] = static_cast<float>(std::clamp(pet[o], 0.0, 10.0));
  }

  study.candidates.reserve(layout.nodes.size());
  for (const PhantomNode& node : layout.nodes) study.candidates.push_back(node.candidate);
  validate_study(study);
  return study;
}

Study generate_study(const PhantomConfig& config, int index) {
  return render_study(config, sample_layout(config, index), index);
}

LabelPairs adjacent_label_pairs(const std::vector<PhantomLayout>& layouts) {
  LabelPairs pairs;
  for (const PhantomLayout& layout : layouts) {
    for (std::size_t i = 1; i < layout.nodes.size(); ++i) {
      const PhantomNode& prev = layout.nodes[i - 1];
      const PhantomNode& cur = layout.nodes[i];
      if (!cur.candidate.pathway_id || prev.candidate.pathway_id != cur.candidate.pathway_id) continue;
      pairs.first.push_back(prev.candidate.positive() ? 1.0 : 0.0);
      pairs.second.push_back(cur.candidate.positive() ? 1.0 : 0.0);
    }
  }
  return pairs;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: need two equal-length samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

DatasetSplit split_dataset(std::size_t study_count, double train_ratio, double val_ratio, double test_ratio,
                           std::uint64_t seed) {
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9 || train_ratio < 0 || val_ratio < 0 ||
      test_ratio < 0) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  if (study_count < 3) throw std::invalid_argument("split needs at least 3 studies");
  const auto n_val = static_cast<std::size_t>(std::floor(val_ratio * static_cast<double>(study_count) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(test_ratio * static_cast<double>(study_count) + 1e-9));
  const std::size_t n_train = study_count - n_val - n_test;
  if (n_val == 0 || n_test == 0 || n_train == 0) {
    throw std::invalid_argument("split of " + std::to_string(study_count) +
                                " studies leaves an empty partition; at least 10 studies are required for a 60/10/30 split");
  }
  std::vector<std::size_t> order(study_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(splitmix64(seed ^ 0x5b1d5eedULL));
  std::shuffle(order.begin(), order.end(), rng);
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

}  // namespace lnrel
