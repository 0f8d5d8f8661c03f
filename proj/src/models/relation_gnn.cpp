#include "lnrel/relation_gnn.h"

#include <algorithm>
#include <stdexcept>

#include "lnrel/evaluation.h"
#include "lnrel/optim.h"

namespace lnrel {

std::string to_string(GnnVariant variant) { return variant == GnnVariant::gnn_b ? "gnn_b" : "gnn_p"; }

GnnDims GnnDims::scaled(int divisor) {
  if (divisor < 1) throw std::invalid_argument("width divisor must be positive");
  GnnDims dims;
  const auto d = static_cast<std::size_t>(divisor);
  for (std::size_t* w : {&dims.feature_width, &dims.prior_width, &dims.hidden_width, &dims.message_width}) {
    if (*w % d != 0) {
      throw std::invalid_argument("width divisor " + std::to_string(divisor) + " does not divide width " +
                                  std::to_string(*w));
    }
    *w /= d;
  }
  return dims;
}

namespace {

MlpSpec spec(std::vector<std::size_t> widths, Activation out) {
  MlpSpec s;
  s.layer_widths = std::move(widths);
  s.hidden_activation = Activation::relu;
  s.output_activation = out;
  return s;
}

void require_width(const Tensor& t, std::size_t width, const char* what) {
  if (t.rank() != 2 || t.dim(1) != width) {
    throw ShapeError(std::string(what) + " must be [N, " + std::to_string(width) + "], got " + shape_str(t.shape()));
  }
}

}  // namespace

RelationGnn::RelationGnn(GnnDims dims, GnnVariant variant, Rng& rng) : dims_(dims), variant_(variant) {
  if (dims.feature_width == 0 || dims.prior_width == 0 || dims.hidden_width == 0 || dims.message_width == 0) {
    throw std::invalid_argument("relation network widths must be positive");
  }
  const std::size_t x = dims.node_width();
  const std::size_t h = dims.hidden_width;
  const std::size_t m = dims.message_width;
  transform_ = Mlp(spec({kSpatialPriorWidth, dims.prior_width, dims.prior_width}, Activation::none), rng);
  phi_h_ = Mlp(spec({dims.feature_width, h}, Activation::none), rng);
  if (variant == GnnVariant::gnn_p) {
    phi_e_ = Mlp(spec({2 * x, m, m}, Activation::none), rng);
  } else {
    phi_e_ = Mlp(spec({x, m, m}, Activation::none), rng);
    alpha_net_ = Mlp(spec({2 * x, m, 1}, Activation::none), rng);
  }
  phi_u_ = Mlp(spec({h + m, h, h}, Activation::relu), rng);
  phi_y_ = Mlp(spec({h, 1}, Activation::sigmoid), rng);
}

GraphNodes RelationGnn::build_nodes(const Tensor& features, const Tensor& priors) const {
  require_width(features, dims_.feature_width, "node features");
  require_width(priors, kSpatialPriorWidth, "node priors");
  if (features.dim(0) != priors.dim(0)) throw ShapeError("feature and prior row counts differ");
  if (features.dim(0) == 0) throw std::invalid_argument("graph has no nodes");
  GraphNodes nodes;
  nodes.f = features;
  nodes.s = priors;
  nodes.s_prime = transform_.forward(priors);
  nodes.x = concat({features, nodes.s_prime}, 1);
  nodes.h = phi_h_.forward(features);  // appearance only
  return nodes;
}

Tensor RelationGnn::messages_pairwise(const GraphNodes& nodes, PairFusion fusion) const {
  if (phi_e_.spec().input_width() != 2 * dims_.node_width()) {
    throw std::logic_error("pairwise messages need the gnn_p edge network");
  }
  const std::size_t n = nodes.size();
  if (fusion == PairFusion::source_only) {
    // Every row receives the same sum over sources.
    const Tensor masked = Tensor::zeros({n, dims_.node_width()});
    const Tensor per_source = phi_e_.forward(concat({masked, nodes.x}, 1));
    return matmul(Tensor::full({n, n}, 1.0), per_source);
  }
  return block_sum(phi_e_.forward(pairwise_concat(nodes.x, nodes.x)), n);
}

Tensor RelationGnn::attention(const GraphNodes& nodes) const {
  if (alpha_net_.layer_count() == 0) throw std::logic_error("attention weights need the gnn_b alpha network");
  const std::size_t n = nodes.size();
  const Tensor scores = alpha_net_.forward(pairwise_concat(nodes.x, nodes.x));
  return softmax_rows(reshape(scores, {n, n}));
}

Tensor RelationGnn::messages_scalar(const GraphNodes& nodes, AlphaMode mode) const {
  if (phi_e_.spec().input_width() != dims_.node_width()) {
    throw std::logic_error("scalar messages need the gnn_b edge network");
  }
  const std::size_t n = nodes.size();
  const Tensor alpha = mode == AlphaMode::ones ? Tensor::full({n, n}, 1.0) : attention(nodes);
  return matmul(alpha, phi_e_.forward(nodes.x));
}

Tensor RelationGnn::messages(const GraphNodes& nodes) const {
  return variant_ == GnnVariant::gnn_p ? messages_pairwise(nodes) : messages_scalar(nodes);
}

Tensor RelationGnn::update_and_predict(const GraphNodes& nodes, const Tensor& messages) const {
  return sigmoid(update_logits(nodes, messages));
}

Tensor RelationGnn::update_logits(const GraphNodes& nodes, const Tensor& messages) const {
  if (messages.rank() != 2 || messages.dim(0) != nodes.size()) {
    throw std::invalid_argument("expected one message per node: " + std::to_string(nodes.size()) + " nodes, messages " +
                                shape_str(messages.shape()));
  }
  require_width(messages, dims_.message_width, "messages");
  const Tensor updated = phi_u_.forward(concat({nodes.h, messages}, 1));
  return reshape(phi_y_.forward_logits(updated), {nodes.size()});
}

Tensor RelationGnn::forward(const Tensor& features, const Tensor& priors) const {
  return sigmoid(logits(features, priors));
}

Tensor RelationGnn::logits(const Tensor& features, const Tensor& priors) const {
  const GraphNodes nodes = build_nodes(features, priors);
  return update_logits(nodes, messages(nodes));
}

void RelationGnn::zero_output_layers() {
  for (Mlp* mlp : {&phi_e_, &phi_y_}) {
    for (double& w : mlp->weight(mlp->layer_count() - 1).value.mutable_data()) w = 0.0;
  }
}

void RelationGnn::collect(ParameterList& out, const std::string& prefix) {
  transform_.collect(out, prefix + ".transform");
  phi_h_.collect(out, prefix + ".phi_h");
  phi_e_.collect(out, prefix + ".phi_e");
  alpha_net_.collect(out, prefix + ".alpha");
  phi_u_.collect(out, prefix + ".phi_u");
  phi_y_.collect(out, prefix + ".phi_y");
}

Tensor prior_matrix(const std::vector<SpatialPrior>& priors) {
  std::vector<double> values;
  values.reserve(priors.size() * kSpatialPriorWidth);
  for (const SpatialPrior& p : priors) {
    const auto row = p.as_array();
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor::from({priors.size(), kSpatialPriorWidth}, std::move(values));
}

JointModel::JointModel(AppearanceConfig cnn_config, GnnDims dims, GnnVariant variant, Rng& rng)
    : cnn_(cnn_config, rng), gnn_(dims, variant, rng) {
  if (cnn_config.feature_width() != dims.feature_width) {
    throw ShapeError("appearance feature width " + std::to_string(cnn_config.feature_width()) +
                     " does not match relation network input " + std::to_string(dims.feature_width));
  }
}

Tensor JointModel::forward_study(const PreparedStudy& study, bool use_pet, int patch_size) const {
  return sigmoid(study_logits(study, use_pet, patch_size));
}

Tensor JointModel::study_logits(const PreparedStudy& study, bool use_pet, int patch_size) const {
  if (study.size() == 0) throw std::invalid_argument("study " + study.study->study_id + " has no candidates");
  std::vector<Tensor> features;
  features.reserve(study.size());
  for (const Candidate& c : study.study->candidates) {
    features.push_back(cnn_.forward_features(extract_patch(*study.study, c, use_pet, patch_size)));
  }
  return gnn_.logits(stack(features), prior_matrix(study.priors));
}

ParameterList JointModel::parameters() {
  ParameterList params;
  cnn_.collect(params, "cnn");
  gnn_.collect(params, "gnn");
  return params;
}

std::size_t warm_start(JointModel& model, const Checkpoint& ckpt, bool first_layer_only) {
  ParameterList params;
  model.cnn().collect(params, "cnn");
  const std::string scope = first_layer_only ? "cnn.block0.conv1." : "cnn.";
  return load_parameters(ckpt, params, [&](const std::string& name) { return name.starts_with(scope); });
}

std::vector<double> predict_joint(const JointModel& model, const PreparedStudy& study, bool use_pet, int patch_size) {
  NoGradGuard no_grad;
  const Tensor probs = model.forward_study(study, use_pet, patch_size);
  return {probs.data().begin(), probs.data().end()};
}

TrainReport train_joint(JointModel& model, const std::vector<PreparedStudy>& train,
                        const std::vector<PreparedStudy>& val, const JointTrainConfig& config,
                        const EpochCallback& on_epoch) {
  if (train.empty()) throw std::invalid_argument("train_joint: empty training set");
  if (config.epochs < 1 || config.accumulation < 1) {
    throw std::invalid_argument("train_joint: epochs and accumulation must be positive");
  }
  const double balanced = balanced_positive_weight(train);
  const double pos_weight = config.positive_weight > 0.0 ? config.positive_weight : balanced;

  ParameterList params = model.parameters();
  const AdamConfig adam{config.lr};
  Rng rng(config.seed ^ 0x6a0147ULL);

  bool select_on_val = false;
  for (const auto& s : val) select_on_val = select_on_val || positive_count(*s.study) > 0;

  auto study_loss = [&](const PreparedStudy& s) {
    const Tensor z = model.study_logits(s, config.use_pet, config.patch_size);
    return bce_with_logits(z, Tensor::from({s.size()}, s.labels()), pos_weight);
  };

  TrainReport report;
  {
    NoGradGuard no_grad;
    double total = 0.0;
    for (const auto& s : train) total += study_loss(s).item();
    report.initial_loss = total / static_cast<double>(train.size());
  }

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  ParameterSnapshot best;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    double total = 0.0;
    int pending = 0;
    for (std::size_t idx : order) {
      const Tensor loss = study_loss(train[idx]);
      total += loss.item();
      loss.backward();
      if (++pending == config.accumulation) {
        adam_step(params, adam);
        ++log.optimizer_steps;
        pending = 0;
      }
    }
    if (pending > 0) {
      adam_step(params, adam);
      ++log.optimizer_steps;
    }
    log.mean_loss = total / static_cast<double>(order.size());
    report.optimizer_steps += log.optimizer_steps;
    if (select_on_val) {
      std::vector<ScoredCandidate> scored;
      for (const auto& s : val) {
        const auto probs = predict_joint(model, s, config.use_pet, config.patch_size);
        for (std::size_t i = 0; i < probs.size(); ++i) {
          scored.push_back({s.study->study_id, probs[i], s.study->candidates[i].positive() ? 1 : 0});
        }
      }
      log.val_f1 = best_f1(scored).f1;
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
