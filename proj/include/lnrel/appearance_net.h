#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "lnrel/dataset.h"
#include "lnrel/nn.h"
#include "lnrel/spatial_priors.h"
#include "lnrel/study.h"

namespace lnrel {

inline constexpr int kPatchSize = 48;
inline constexpr int kPatchMargin = 8;
inline constexpr int kBlockCount = 4;

struct Patch {
  int channels = 1;  // 1 = CT, 2 = CT + PET
  Tensor voxels;     // [channels, S, S, S]
  Box3 roi_box;      // candidate bbox in patch coordinates
  double scale = 1.0;  // patch voxels per source voxel
};

// Normalisation windows shared by training and inference.
double normalize_ct(double hu);
double normalize_pet(double uptake);

// Cubic crop centred on the candidate. When bbox + margin exceeds the patch,
// the enclosing cube is resampled trilinearly down to the patch size.
// Out-of-volume voxels read as 0 after normalisation.
Patch extract_patch(const Study& study, const Candidate& candidate, bool use_pet, int patch_size = kPatchSize,
                    int margin = kPatchMargin);

// Maps a patch-space box into a feature map reduced by `cumulative_stride`:
// floor for the low corner, ceil for the high corner, at least one voxel.
Box3 roi_to_feature(const Box3& roi, int cumulative_stride, const Index3& feature_extent);

struct AppearanceConfig {
  int in_channels = 2;
  std::array<int, kBlockCount> block_widths{16, 32, 64, 128};
  std::array<int, kBlockCount> block_strides{1, 2, 2, 2};
  int head_width = 256;

  std::size_t feature_width() const { return static_cast<std::size_t>(kBlockCount * head_width); }
  // Block widths become max(min_block_width, w / divisor); head width must
  // divide exactly.
  static AppearanceConfig scaled(int width_divisor, bool use_pet, int min_block_width = 1);
};

// Four conv(3)-relu-conv(3)-relu blocks. Each block output is ROI-averaged
// and projected to head_width with linear+relu; the projections are
// concatenated in block order into the appearance feature f.
class AppearanceNet {
 public:
  AppearanceNet() = default;
  AppearanceNet(AppearanceConfig config, Rng& rng);

  Tensor forward_features(const Patch& patch) const;

  const AppearanceConfig& config() const { return config_; }
  void collect(ParameterList& out, const std::string& prefix = "cnn");

 private:
  struct Block {
    Parameter conv1_w, conv1_b, conv2_w, conv2_b;
    Parameter head_w, head_b;
    int stride = 1;
  };
  AppearanceConfig config_;
  std::vector<Block> blocks_;
};

// Instance-wise classifier: appearance features (optionally with the raw
// spatial prior appended) through an MLP head ending in a sigmoid.
class CnnClassifier {
 public:
  CnnClassifier() = default;
  CnnClassifier(AppearanceConfig config, bool use_prior, Rng& rng);
  CnnClassifier(AppearanceNet net, Mlp head, bool use_prior);

  // Probability tensor of shape [1].
  Tensor forward(const Patch& patch, const SpatialPrior* prior) const;
  // Pre-sigmoid logit of shape [1].
  Tensor logit(const Patch& patch, const SpatialPrior* prior) const;

  AppearanceNet& net() { return net_; }
  const AppearanceNet& net() const { return net_; }
  const Mlp& head() const { return head_; }
  Mlp& head() { return head_; }
  bool uses_prior() const { return use_prior_; }
  ParameterList parameters();

 private:
  AppearanceNet net_;
  Mlp head_;
  bool use_prior_ = false;
};

MlpSpec cnn_head_spec(std::size_t feature_width, bool use_prior, int width_divisor);

// Probability for one patch. Throws if the head width does not match the
// feature width (+6 when a prior is supplied).
double classify_cnn(const AppearanceNet& net, const Mlp& head, const Patch& patch,
                    const std::optional<SpatialPrior>& prior);

struct CnnTrainConfig {
  double lr = 1e-4;
  int epochs = 10;
  int batch_size = 32;
  bool use_pet = true;
  int patch_size = kPatchSize;
  std::uint64_t seed = 1;
  double positive_weight = 0.0;  // <= 0: #neg / #pos on the training split
};

// Mini-batch Adam over all training candidates in a seeded shuffle. The
// parameters of the epoch with the best validation F1 are kept (the last
// epoch when no validation studies are given).
TrainReport train_cnn(CnnClassifier& model, const std::vector<PreparedStudy>& train,
                      const std::vector<PreparedStudy>& val, const CnnTrainConfig& config,
                      const EpochCallback& on_epoch = {});

// Per-candidate probabilities without recording a graph.
std::vector<double> predict_cnn(const CnnClassifier& model, const PreparedStudy& study, bool use_pet,
                                int patch_size = kPatchSize);

}  // namespace lnrel
