#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lnrel/appearance_net.h"
#include "lnrel/checkpoint.h"
#include "lnrel/dataset.h"
#include "lnrel/nn.h"

namespace lnrel {

enum class GnnVariant { gnn_b, gnn_p };

std::string to_string(GnnVariant variant);

struct GnnDims {
  std::size_t feature_width = 1024;  // |f|
  std::size_t prior_width = 640;     // |s'|
  std::size_t hidden_width = 256;    // |h|
  std::size_t message_width = 256;   // |m|

  std::size_t node_width() const { return feature_width + prior_width; }  // |x|
  // Every width divided by `divisor`, which must divide each exactly.
  static GnnDims scaled(int divisor);
};

// Per-graph node tensors, one row per candidate.
struct GraphNodes {
  Tensor f;        // [N, |f|]
  Tensor s;        // [N, 6]
  Tensor s_prime;  // [N, |s'|]
  Tensor x;        // [N, |x|] = f ++ s'
  Tensor h;        // [N, |h|]

  std::size_t size() const { return f.dim(0); }
};

// How the pairwise message input is formed from (target u, source v).
enum class PairFusion {
  concat,       // x_u ++ x_v
  source_only,  // 0 ++ x_v (target masked out)
};

enum class AlphaMode {
  softmax,  // learned scores, normalised over the neighbourhood
  ones,     // every alpha fixed to 1
};

// One round of message passing over the fully connected graph with
// self-edges. gnn_p feeds node pairs through phi_e; gnn_b weights phi_e(x_v)
// by scalar attention from alpha_net.
class RelationGnn {
 public:
  RelationGnn() = default;
  RelationGnn(GnnDims dims, GnnVariant variant, Rng& rng);

  GraphNodes build_nodes(const Tensor& features, const Tensor& priors) const;

  // [N, |m|]; row u sums phi_e over v = 0..N-1 in index order.
  Tensor messages_pairwise(const GraphNodes& nodes, PairFusion fusion = PairFusion::concat) const;
  // [N, |m|]; row u is sum_v alpha_uv phi_e(x_v).
  Tensor messages_scalar(const GraphNodes& nodes, AlphaMode mode = AlphaMode::softmax) const;
  // [N, N] attention weights of the scalar variant.
  Tensor attention(const GraphNodes& nodes) const;
  Tensor messages(const GraphNodes& nodes) const;

  // Probabilities [N] from phi_y(phi_u(h ++ m)).
  Tensor update_and_predict(const GraphNodes& nodes, const Tensor& messages) const;
  // Pre-sigmoid output of the same computation.
  Tensor update_logits(const GraphNodes& nodes, const Tensor& messages) const;

  // features [N, |f|], priors [N, 6] -> probabilities [N].
  Tensor forward(const Tensor& features, const Tensor& priors) const;
  Tensor logits(const Tensor& features, const Tensor& priors) const;

  const GnnDims& dims() const { return dims_; }
  GnnVariant variant() const { return variant_; }
  Mlp& transform() { return transform_; }
  Mlp& phi_h() { return phi_h_; }
  Mlp& phi_e() { return phi_e_; }
  Mlp& alpha_net() { return alpha_net_; }
  Mlp& phi_u() { return phi_u_; }
  Mlp& phi_y() { return phi_y_; }
  const Mlp& phi_e() const { return phi_e_; }

  void collect(ParameterList& out, const std::string& prefix = "gnn");

  // Zeroes the output-layer weights of phi_e and phi_y: messages start at the
  // phi_e bias sum and every prediction at sigmoid(bias), so training begins
  // from a node-wise classifier instead of logits that scale with N.
  void zero_output_layers();

 private:
  GnnDims dims_;
  GnnVariant variant_ = GnnVariant::gnn_p;
  Mlp transform_, phi_h_, phi_e_, alpha_net_, phi_u_, phi_y_;
};

// Rows of the spatial priors as a [N, 6] tensor.
Tensor prior_matrix(const std::vector<SpatialPrior>& priors);

// CNN backbone feeding the relation network, trained end to end.
class JointModel {
 public:
  JointModel() = default;
  JointModel(AppearanceConfig cnn_config, GnnDims dims, GnnVariant variant, Rng& rng);

  Tensor forward_study(const PreparedStudy& study, bool use_pet, int patch_size = kPatchSize) const;
  Tensor study_logits(const PreparedStudy& study, bool use_pet, int patch_size = kPatchSize) const;

  AppearanceNet& cnn() { return cnn_; }
  RelationGnn& gnn() { return gnn_; }
  const RelationGnn& gnn() const { return gnn_; }
  ParameterList parameters();

 private:
  AppearanceNet cnn_;
  RelationGnn gnn_;
};

// Loads the CNN backbone (or only its first convolution) from a checkpoint
// written for a CnnClassifier. Returns the number of tensors loaded.
std::size_t warm_start(JointModel& model, const Checkpoint& ckpt, bool first_layer_only);

struct JointTrainConfig {
  double lr = 1e-4;
  int epochs = 10;
  int accumulation = 8;
  bool use_pet = true;
  int patch_size = kPatchSize;
  std::uint64_t seed = 1;
  double positive_weight = 0.0;  // <= 0: #neg / #pos on the training split
};

// Per-study bce over that study's nodes; gradients summed over `accumulation`
// studies per Adam step, with a final step for any remainder. Selection by
// best validation F1 as in train_cnn.
TrainReport train_joint(JointModel& model, const std::vector<PreparedStudy>& train,
                        const std::vector<PreparedStudy>& val, const JointTrainConfig& config,
                        const EpochCallback& on_epoch = {});

std::vector<double> predict_joint(const JointModel& model, const PreparedStudy& study, bool use_pet,
                                  int patch_size = kPatchSize);

}  // namespace lnrel
