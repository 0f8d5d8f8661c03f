#pragma once

#include <cstdint>
#include <vector>

#include "lnrel/study.h"

namespace lnrel {

// Synthetic study generator. Lymph-node sites lie on polyline pathways that
// leave the tumour; site labels follow a Markov chain along each pathway
// (adjacent-label correlation = label_correlation). Off-pathway false
// positives are vessel-like tubes. Node uptake is scaled by a per-study
// factor applied to lesions only, so absolute PET intensity is ambiguous
// without looking at the other candidates of the same study.
struct PhantomConfig {
  Index3 volume_shape{64, 96, 96};
  Vec3 spacing{1.0, 1.0, 1.0};
  int studies = 100;
  double candidates_per_study = 25.0;  // mean
  double candidates_spread = 3.0;      // standard deviation
  double fp_per_study = 15.0;          // mean false positives
  int pathway_count = 3;
  double pathway_positive_rate = 0.6;  // stationary P(true) along a pathway
  double label_correlation = 0.7;      // rho in [0, 1]
  double ct_noise_hu = 20.0;
  double pet_noise = 0.2;
  double uptake_spread = 0.5;  // sd of the per-study log uptake factor
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on non-positive counts, rho outside [0,1],
  // or count means that cannot be met.
  void validate() const;
};

// Geometry and labels of one study, without voxel data.
struct PhantomNode {
  Vec3 center_mm{};
  Vec3 radii_mm{};
  Vec3 axis{0.0, 0.0, 1.0};  // tube direction; unused for nodes
  double length_mm = 0.0;    // > 0 marks a tube
  double uptake = 0.0;
  double ct_hu = 0.0;
  double ct_texture_hu = 0.0;
  Candidate candidate;
  int order_on_pathway = -1;
};

struct PhantomLayout {
  std::uint64_t seed = 0;
  Vec3 tumor_center_mm{};
  Vec3 tumor_radii_mm{};
  double uptake_factor = 1.0;
  std::vector<PhantomNode> nodes;  // pathway sites first, in pathway order
};

std::uint64_t study_seed(std::uint64_t base_seed, int index);

// Layout only: cheap, and identical to the layout of generate_study.
PhantomLayout sample_layout(const PhantomConfig& config, int index);
Study render_study(const PhantomConfig& config, const PhantomLayout& layout, int index);
Study generate_study(const PhantomConfig& config, int index);

// Labels of consecutive sites on the same pathway, pooled over a layout set.
struct LabelPairs {
  std::vector<double> first;
  std::vector<double> second;
};
LabelPairs adjacent_label_pairs(const std::vector<PhantomLayout>& layouts);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Study-level split; validation and test sizes are floor(ratio * n) and the
// remainder goes to training. Throws when any part would be empty.
DatasetSplit split_dataset(std::size_t study_count, double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed);
inline DatasetSplit split_dataset(std::size_t study_count, std::uint64_t seed) {
  return split_dataset(study_count, 0.6, 0.1, 0.3, seed);
}

}  // namespace lnrel
