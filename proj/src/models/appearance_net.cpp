#include "lnrel/appearance_net.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lnrel/evaluation.h"
#include "lnrel/optim.h"

namespace lnrel {

double normalize_ct(double hu) { return (std::clamp(hu, -1000.0, 1000.0) + 1000.0) / 2000.0; }

double normalize_pet(double uptake) { return std::clamp(uptake / 10.0, 0.0, 1.0); }

namespace {

double normalized_voxel(const Volume3D& vol, bool pet, int z, int y, int x) {
  if (!vol.in_bounds(z, y, x)) return 0.0;
  const double v = vol.at(z, y, x);
  return pet ? normalize_pet(v) : normalize_ct(v);
}

double trilinear(const Volume3D& vol, bool pet, double z, double y, double x) {
  const int z0 = static_cast<int>(std::floor(z));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fz = z - z0, fy = y - y0, fx = x - x0;
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? fz : 1.0 - fz;
    if (wz == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? fy : 1.0 - fy;
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? fx : 1.0 - fx;
        if (wx == 0.0) continue;
        acc += wz * wy * wx * normalized_voxel(vol, pet, z0 + dz, y0 + dy, x0 + dx);
      }
    }
  }
  return acc;
}

}  // namespace

Patch extract_patch(const Study& study, const Candidate& candidate, bool use_pet, int patch_size, int margin) {
  if (!study.ct.in_bounds(candidate.center)) {
    throw std::out_of_range("candidate centre lies outside the volume of " + study.study_id);
  }
  if (patch_size < 1 || margin < 0) throw std::invalid_argument("extract_patch: bad patch size or margin");
  Patch patch;
  patch.channels = use_pet ? 2 : 1;
  int side = patch_size;
  for (int a = 0; a < 3; ++a) side = std::max(side, candidate.bbox.extent(a) + 2 * margin);
  patch.scale = static_cast<double>(patch_size) / side;

  const std::size_t s = static_cast<std::size_t>(patch_size);
  std::vector<double> voxels(patch.channels * s * s * s);
  const Index3& c = candidate.center;
  // Corner-space origin of the sampled cube: source voxel j spans [j, j+1).
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = c[a] - side / 2.0;

  for (int ch = 0; ch < patch.channels; ++ch) {
    const bool pet = ch == 1;
    const Volume3D& vol = pet ? study.pet : study.ct;
    double* out = voxels.data() + ch * s * s * s;
    if (side == patch_size) {
      const Index3 base{c[0] - patch_size / 2, c[1] - patch_size / 2, c[2] - patch_size / 2};
      for (int i = 0; i < patch_size; ++i) {
        for (int j = 0; j < patch_size; ++j) {
          for (int k = 0; k < patch_size; ++k) {
            *out++ = normalized_voxel(vol, pet, base[0] + i, base[1] + j, base[2] + k);
          }
        }
      }
    } else {
      const double step = static_cast<double>(side) / patch_size;
      for (int i = 0; i < patch_size; ++i) {
        const double sz = origin[0] + (i + 0.5) * step - 0.5;
        for (int j = 0; j < patch_size; ++j) {
          const double sy = origin[1] + (j + 0.5) * step - 0.5;
          for (int k = 0; k < patch_size; ++k) {
            const double sx = origin[2] + (k + 0.5) * step - 0.5;
            *out++ = trilinear(vol, pet, sz, sy, sx);
          }
        }
      }
    }
  }
  patch.voxels = Tensor::from({static_cast<std::size_t>(patch.channels), s, s, s}, std::move(voxels));

  const Box3& bbox = candidate.bbox;
  for (int a = 0; a < 3; ++a) {
    const double lo = (bbox.lo[a] - (side == patch_size ? c[a] - patch_size / 2 : origin[a])) * patch.scale;
    const double hi = (bbox.hi[a] - (side == patch_size ? c[a] - patch_size / 2 : origin[a])) * patch.scale;
    patch.roi_box.lo[a] = std::clamp(static_cast<int>(std::floor(lo + 1e-9)), 0, patch_size - 1);
    patch.roi_box.hi[a] = std::clamp(static_cast<int>(std::ceil(hi - 1e-9)), patch.roi_box.lo[a] + 1, patch_size);
  }
  return patch;
}

Box3 roi_to_feature(const Box3& roi, int cumulative_stride, const Index3& feature_extent) {
  Box3 out;
  for (int a = 0; a < 3; ++a) {
    int lo = roi.lo[a] / cumulative_stride;
    int hi = (roi.hi[a] + cumulative_stride - 1) / cumulative_stride;
    lo = std::clamp(lo, 0, feature_extent[a] - 1);
    hi = std::clamp(hi, lo + 1, feature_extent[a]);
    out.lo[a] = lo;
    out.hi[a] = hi;
  }
  return out;
}

AppearanceConfig AppearanceConfig::scaled(int width_divisor, bool use_pet, int min_block_width) {
  if (width_divisor < 1 || min_block_width < 1) throw std::invalid_argument("width divisor and block width must be positive");
  AppearanceConfig config;
  config.in_channels = use_pet ? 2 : 1;
  if (config.head_width % width_divisor != 0) {
    throw std::invalid_argument("width divisor " + std::to_string(width_divisor) + " does not divide head width " +
                                std::to_string(config.head_width));
  }
  config.head_width /= width_divisor;
  for (int& w : config.block_widths) w = std::max(min_block_width, w / width_divisor);
  return config;
}

AppearanceNet::AppearanceNet(AppearanceConfig config, Rng& rng) : config_(config) {
  int in = config_.in_channels;
  for (int b = 0; b < kBlockCount; ++b) {
    const auto out = static_cast<std::size_t>(config_.block_widths[b]);
    const auto cin = static_cast<std::size_t>(in);
    Block block;
    block.stride = config_.block_strides[b];
    block.conv1_w = Parameter(he_uniform({out, cin, 3, 3, 3}, cin * 27, rng));
    block.conv1_b = Parameter(Tensor::zeros({out}));
    block.conv2_w = Parameter(he_uniform({out, out, 3, 3, 3}, out * 27, rng));
    block.conv2_b = Parameter(Tensor::zeros({out}));
    const auto head = static_cast<std::size_t>(config_.head_width);
    block.head_w = Parameter(glorot_uniform({head, out}, out, head, rng));
    block.head_b = Parameter(Tensor::zeros({head}));
    blocks_.push_back(std::move(block));
    in = config_.block_widths[b];
  }
}

Tensor AppearanceNet::forward_features(const Patch& patch) const {
  if (patch.voxels.rank() != 4 || static_cast<int>(patch.voxels.dim(0)) != config_.in_channels) {
    throw ShapeError("appearance net expects " + std::to_string(config_.in_channels) + " input channels, patch is " +
                     shape_str(patch.voxels.shape()));
  }
  Tensor h = patch.voxels;
  int cumulative = 1;
  std::vector<Tensor> taps;
  taps.reserve(blocks_.size());
  for (const Block& block : blocks_) {
    h = relu(conv3d(h, block.conv1_w.value, block.conv1_b.value, block.stride, 1));
    h = relu(conv3d(h, block.conv2_w.value, block.conv2_b.value, 1, 1));
    cumulative *= block.stride;
    const Index3 extent{static_cast<int>(h.dim(1)), static_cast<int>(h.dim(2)), static_cast<int>(h.dim(3))};
    const Tensor pooled = roi_gap(h, roi_to_feature(patch.roi_box, cumulative, extent));
    taps.push_back(relu(linear(pooled, block.head_w.value, block.head_b.value)));
  }
  return concat(taps, 0);
}

void AppearanceNet::collect(ParameterList& out, const std::string& prefix) {
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string p = prefix + ".block" + std::to_string(b);
    out.push_back({p + ".conv1.weight", &blocks_[b].conv1_w});
    out.push_back({p + ".conv1.bias", &blocks_[b].conv1_b});
    out.push_back({p + ".conv2.weight", &blocks_[b].conv2_w});
    out.push_back({p + ".conv2.bias", &blocks_[b].conv2_b});
    out.push_back({p + ".head.weight", &blocks_[b].head_w});
    out.push_back({p + ".head.bias", &blocks_[b].head_b});
  }
}

MlpSpec cnn_head_spec(std::size_t feature_width, bool use_prior, int width_divisor) {
  MlpSpec spec;
  spec.layer_widths = {feature_width + (use_prior ? kSpatialPriorWidth : 0),
                       static_cast<std::size_t>(256 / width_divisor), 1};
  spec.hidden_activation = Activation::relu;
  spec.output_activation = Activation::sigmoid;
  return spec;
}

CnnClassifier::CnnClassifier(AppearanceConfig config, bool use_prior, Rng& rng)
    : net_(config, rng), use_prior_(use_prior) {
  const int divisor = 256 / config.head_width;
  head_ = Mlp(cnn_head_spec(config.feature_width(), use_prior, std::max(1, divisor)), rng);
}

CnnClassifier::CnnClassifier(AppearanceNet net, Mlp head, bool use_prior)
    : net_(std::move(net)), head_(std::move(head)), use_prior_(use_prior) {
  const std::size_t expected = net_.config().feature_width() + (use_prior_ ? kSpatialPriorWidth : 0);
  if (head_.spec().input_width() != expected || head_.spec().output_width() != 1) {
    throw ShapeError("classifier head must map " + std::to_string(expected) + " inputs to 1 output");
  }
}

namespace {

Tensor prior_tensor(const SpatialPrior& prior) {
  const auto values = prior.as_array();
  return Tensor::from({kSpatialPriorWidth}, std::vector<double>(values.begin(), values.end()));
}

}  // namespace

Tensor CnnClassifier::forward(const Patch& patch, const SpatialPrior* prior) const {
  return sigmoid(logit(patch, prior));
}

Tensor CnnClassifier::logit(const Patch& patch, const SpatialPrior* prior) const {
  if (use_prior_ && !prior) throw std::invalid_argument("classifier was built with spatial priors but none was given");
  Tensor f = net_.forward_features(patch);
  if (use_prior_) f = concat({f, prior_tensor(*prior)}, 0);
  return head_.forward_logits(f);
}

ParameterList CnnClassifier::parameters() {
  ParameterList params;
  net_.collect(params, "cnn");
  head_.collect(params, "cnn_head");
  return params;
}

double classify_cnn(const AppearanceNet& net, const Mlp& head, const Patch& patch,
                    const std::optional<SpatialPrior>& prior) {
  const std::size_t expected = net.config().feature_width() + (prior ? kSpatialPriorWidth : 0);
  if (head.spec().input_width() != expected) {
    throw ShapeError("classifier head expects " + std::to_string(head.spec().input_width()) + " inputs, features give " +
                     std::to_string(expected));
  }
  NoGradGuard no_grad;
  Tensor f = net.forward_features(patch);
  if (prior) f = concat({f, prior_tensor(*prior)}, 0);
  return head.forward(f).item();
}

std::vector<double> predict_cnn(const CnnClassifier& model, const PreparedStudy& study, bool use_pet, int patch_size) {
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(study.size());
  for (std::size_t i = 0; i < study.size(); ++i) {
    const Patch patch = extract_patch(*study.study, study.study->candidates[i], use_pet, patch_size);
    out.push_back(model.forward(patch, &study.priors[i]).item());
  }
  return out;
}

namespace {

double validation_f1(const CnnClassifier& model, const std::vector<PreparedStudy>& val, bool use_pet, int patch_size) {
  std::vector<ScoredCandidate> scored;
  for (const auto& s : val) {
    const auto probs = predict_cnn(model, s, use_pet, patch_size);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scored.push_back({s.study->study_id, probs[i], s.study->candidates[i].positive() ? 1 : 0});
    }
  }
  return best_f1(scored).f1;
}

bool has_positive(const std::vector<PreparedStudy>& studies) {
  for (const auto& s : studies) {
    if (positive_count(*s.study) > 0) return true;
  }
  return false;
}

}  // namespace

TrainReport train_cnn(CnnClassifier& model, const std::vector<PreparedStudy>& train,
                      const std::vector<PreparedStudy>& val, const CnnTrainConfig& config,
                      const EpochCallback& on_epoch) {
  if (train.empty()) throw std::invalid_argument("train_cnn: empty training set");
  if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("train_cnn: epochs and batch size must be positive");
  const double balanced = balanced_positive_weight(train);  // rejects single-class data
  const double pos_weight = config.positive_weight > 0.0 ? config.positive_weight : balanced;

  struct Ref {
    std::size_t study, candidate;
  };
  std::vector<Ref> refs;
  for (std::size_t s = 0; s < train.size(); ++s) {
    for (std::size_t c = 0; c < train[s].size(); ++c) refs.push_back({s, c});
  }

  ParameterList params = model.parameters();
  const AdamConfig adam{config.lr};
  Rng rng(config.seed ^ 0xc4a11e5ULL);
  const bool select_on_val = !val.empty() && has_positive(val);

  auto sample_loss = [&](const Ref& r, double weight) {
    const PreparedStudy& ps = train[r.study];
    const Candidate& cand = ps.study->candidates[r.candidate];
    const Patch patch = extract_patch(*ps.study, cand, config.use_pet, config.patch_size);
    const Tensor z = model.logit(patch, &ps.priors[r.candidate]);
    const Tensor y = Tensor::scalar(cand.positive() ? 1.0 : 0.0);
    return scale(bce_with_logits(z, y, pos_weight), weight);
  };

  TrainReport report;
  {
    NoGradGuard no_grad;
    double total = 0.0;
    for (const Ref& r : refs) total += sample_loss(r, 1.0).item();
    report.initial_loss = total / static_cast<double>(refs.size());
  }

  ParameterSnapshot best;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(refs.begin(), refs.end(), rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < refs.size(); start += config.batch_size) {
      const std::size_t end = std::min(refs.size(), start + static_cast<std::size_t>(config.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const Tensor loss = sample_loss(refs[i], weight);
        epoch_loss += loss.item() / weight;
        loss.backward();
      }
      adam_step(params, adam);
      ++steps;
    }
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = epoch_loss / static_cast<double>(refs.size());
    log.optimizer_steps = steps;
    report.optimizer_steps += steps;
    if (select_on_val) {
      log.val_f1 = validation_f1(model, val, config.use_pet, config.patch_size);
      if (report.best_epoch < 0 || log.val_f1 > report.best_val_f1) {
        report.best_epoch = epoch;
        report.best_val_f1 = log.val_f1;
        best = snapshot(params);
      }
    }
    report.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (select_on_val) {
    restore(params, best);
  } else {
    report.best_epoch = config.epochs;
  }
  return report;
}

}  // namespace lnrel
