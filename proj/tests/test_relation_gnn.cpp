#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "lnrel/phantom.h"
#include "lnrel/relation_gnn.h"
#include "support/oracles.h"

using namespace lnrel;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = u(rng);
  return Tensor::from({rows, cols}, std::move(v));
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void zero_weights(Mlp& mlp) {
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    for (double& v : mlp.weight(l).value.mutable_data()) v = 0.0;
  }
}

void fill_biases(Mlp& mlp, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    for (double& v : mlp.bias(l).value.mutable_data()) v = u(rng);
  }
}

const GnnDims kMicro = GnnDims::scaled(64);

PhantomConfig tiny_phantom() {
  PhantomConfig cfg;
  cfg.volume_shape = {24, 32, 32};
  cfg.candidates_per_study = 6;
  cfg.candidates_spread = 1;
  cfg.fp_per_study = 3;
  return cfg;
}

}  // namespace

TEST(GnnDims, FullWidths) {
  Rng rng(1);
  const GnnDims d;
  EXPECT_EQ(d.node_width(), 1664u);
  RelationGnn p(d, GnnVariant::gnn_p, rng);
  EXPECT_EQ(p.transform().spec().input_width(), 6u);
  EXPECT_EQ(p.transform().spec().output_width(), 640u);
  EXPECT_EQ(p.phi_h().spec().input_width(), 1024u);
  EXPECT_EQ(p.phi_h().spec().output_width(), 256u);
  EXPECT_EQ(p.phi_e().spec().input_width(), 3328u);
  EXPECT_EQ(p.phi_e().spec().output_width(), 256u);
  EXPECT_EQ(p.phi_u().spec().input_width(), 512u);
  EXPECT_EQ(p.phi_y().spec().output_width(), 1u);
  RelationGnn b(d, GnnVariant::gnn_b, rng);
  EXPECT_EQ(b.phi_e().spec().input_width(), 1664u);
  EXPECT_EQ(b.alpha_net().spec().input_width(), 3328u);
  EXPECT_EQ(b.alpha_net().spec().output_width(), 1u);
}

TEST(GnnDims, ScaledDesk) {
  const GnnDims d = GnnDims::scaled(16);
  EXPECT_EQ(d.feature_width, 64u);
  EXPECT_EQ(d.prior_width, 40u);
  EXPECT_EQ(d.node_width(), 104u);
  EXPECT_EQ(d.hidden_width, 16u);
  EXPECT_THROW(GnnDims::scaled(3), std::invalid_argument);
}

TEST(BuildNodes, ConcatenationAndBiases) {
  Rng rng(2);
  RelationGnn g(kMicro, GnnVariant::gnn_p, rng);
  zero_weights(g.transform());
  zero_weights(g.phi_h());
  fill_biases(g.transform(), rng);
  fill_biases(g.phi_h(), rng);
  const Tensor f = random_matrix(3, kMicro.feature_width, rng);
  const GraphNodes n = g.build_nodes(f, random_matrix(3, 6, rng));
  for (std::size_t u = 0; u < 3; ++u) {
    const auto x = oracle::row(n.x, u), fu = oracle::row(f, u);
    EXPECT_TRUE(std::equal(fu.begin(), fu.end(), x.begin()));
    EXPECT_EQ(oracle::row(n.s_prime, u), values(g.transform().bias(1).value));
    EXPECT_EQ(oracle::row(n.h, u), values(g.phi_h().bias(0).value));
  }
  EXPECT_THROW(g.build_nodes(random_matrix(3, 7, rng), random_matrix(3, 6, rng)), ShapeError);
  EXPECT_THROW(g.build_nodes(f, random_matrix(2, 6, rng)), ShapeError);
}

TEST(MessagesPairwise, SingleNodeIsSelfEdge) {
  Rng rng(3);
  RelationGnn g(kMicro, GnnVariant::gnn_p, rng);
  const GraphNodes n = g.build_nodes(random_matrix(1, kMicro.feature_width, rng), random_matrix(1, 6, rng));
  const auto x = oracle::row(n.x, 0);
  std::vector<double> xx(x);
  xx.insert(xx.end(), x.begin(), x.end());
  const auto expected = oracle::mlp_apply(g.phi_e(), xx);
  const auto got = values(g.messages_pairwise(n));
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(got[k], expected[k], 1e-12);
}

TEST(MessagesPairwise, ZeroWeightsSumBiases) {
  Rng rng(4);
  RelationGnn g(kMicro, GnnVariant::gnn_p, rng);
  zero_weights(g.phi_e());
  fill_biases(g.phi_e(), rng);
  const GraphNodes n = g.build_nodes(random_matrix(5, kMicro.feature_width, rng), random_matrix(5, 6, rng));
  const Tensor m = g.messages_pairwise(n);
  const auto b = values(g.phi_e().bias(1).value);
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t k = 0; k < b.size(); ++k) EXPECT_NEAR(m.at(u * b.size() + k), 5.0 * b[k], 1e-12);
}

TEST(MessagesScalar, SingleNodeAndIdenticalNodes) {
  Rng rng(5);
  RelationGnn g(kMicro, GnnVariant::gnn_b, rng);
  const Tensor f1 = random_matrix(1, kMicro.feature_width, rng), s1 = random_matrix(1, 6, rng);
  const GraphNodes one = g.build_nodes(f1, s1);
  EXPECT_DOUBLE_EQ(g.attention(one).item(), 1.0);
  const auto expected = oracle::mlp_apply(g.phi_e(), oracle::row(one.x, 0));
  const auto got = values(g.messages_scalar(one));
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(got[k], expected[k], 1e-12);

  const GraphNodes same = g.build_nodes(stack({select(f1, 0), select(f1, 0), select(f1, 0), select(f1, 0)}),
                                        stack({select(s1, 0), select(s1, 0), select(s1, 0), select(s1, 0)}));
  const Tensor alpha = g.attention(same);
  for (double a : alpha.data()) EXPECT_NEAR(a, 0.25, 1e-15);
}

TEST(Gnn, MatchesDoubleLoopOracle) {
  Rng rng(6);
  for (GnnVariant v : {GnnVariant::gnn_p, GnnVariant::gnn_b}) {
    RelationGnn g(kMicro, v, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t n = 3 + trial;
      const Tensor f = random_matrix(n, kMicro.feature_width, rng), s = random_matrix(n, 6, rng);
      const auto ref = oracle::gnn_reference(g, f, s);
      const GraphNodes nodes = g.build_nodes(f, s);
      const Tensor m = g.messages(nodes);
      const Tensor y = g.update_and_predict(nodes, m);
      for (std::size_t u = 0; u < n; ++u) {
        const auto mu = oracle::row(m, u);
        for (std::size_t k = 0; k < mu.size(); ++k) EXPECT_NEAR(mu[k], ref.messages[u][k], 1e-12);
        EXPECT_NEAR(y.at(u), ref.predictions[u], 1e-12);
        EXPECT_GT(y.at(u), 0.0);
        EXPECT_LT(y.at(u), 1.0);
      }
    }
  }
}

TEST(Gnn, SelfEdgeContributes) {
  Rng rng(7);
  RelationGnn g(kMicro, GnnVariant::gnn_p, rng);
  const std::size_t n = 4;
  const Tensor f = random_matrix(n, kMicro.feature_width, rng), s = random_matrix(n, 6, rng);
  const auto ref = oracle::gnn_reference(g, f, s);
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> without(kMicro.message_width, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u) continue;
      std::vector<double> pair(ref.x[u]);
      pair.insert(pair.end(), ref.x[v].begin(), ref.x[v].end());
      const auto e = oracle::mlp_apply(g.phi_e(), pair);
      for (std::size_t k = 0; k < e.size(); ++k) without[k] += e[k];
    }
    EXPECT_NE(without, ref.messages[u]);
  }
}

TEST(Gnn, UpdateRejectsMessageCountMismatch) {
  Rng rng(8);
  RelationGnn g(kMicro, GnnVariant::gnn_p, rng);
  const GraphNodes n = g.build_nodes(random_matrix(3, kMicro.feature_width, rng), random_matrix(3, 6, rng));
  EXPECT_THROW(g.update_and_predict(n, random_matrix(2, kMicro.message_width, rng)), std::invalid_argument);
}

TEST(Gnn, ZeroedOutputLayerGivesHalf) {
  Rng rng(9);
  RelationGnn g(kMicro, GnnVariant::gnn_b, rng);
  zero_weights(g.phi_y());
  const Tensor y = g.forward(random_matrix(4, kMicro.feature_width, rng), random_matrix(4, 6, rng));
  for (double p : y.data()) EXPECT_EQ(p, 0.5);
}

TEST(Gnn, ZeroOutputLayersStartNodeWise) {
  Rng rng(19);
  for (GnnVariant v : {GnnVariant::gnn_p, GnnVariant::gnn_b}) {
    RelationGnn g(kMicro, v, rng);
    g.zero_output_layers();
    fill_biases(g.phi_e(), rng);
    const std::size_t n = 6;
    const GraphNodes nodes = g.build_nodes(random_matrix(n, kMicro.feature_width, rng), random_matrix(n, 6, rng));
    const auto b = values(g.phi_e().bias(g.phi_e().layer_count() - 1).value);
    const double weight = v == GnnVariant::gnn_p ? static_cast<double>(n) : 1.0;  // sum vs softmax average
    const Tensor m = g.messages(nodes);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t k = 0; k < b.size(); ++k) EXPECT_NEAR(m.at(u * b.size() + k), weight * b[k], 1e-12);
    const Tensor y = g.update_and_predict(nodes, m);
    for (double p : y.data()) EXPECT_NEAR(p, 0.5, 1e-15);  // phi_y output bias starts at zero
  }
}

TEST(Gnn, PermutationEquivariance) {
  Rng rng(10);
  for (GnnVariant v : {GnnVariant::gnn_p, GnnVariant::gnn_b}) {
    RelationGnn g(GnnDims::scaled(16), v, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const std::size_t n = 2 + 3 * trial;
      const Tensor f = random_matrix(n, 64, rng), s = random_matrix(n, 6, rng);
      std::vector<std::size_t> perm(n);
      for (std::size_t i = 0; i < n; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<Tensor> fr, sr;
      for (std::size_t i : perm) {
        fr.push_back(select(f, i));
        sr.push_back(select(s, i));
      }
      const Tensor y = g.forward(f, s), yp = g.forward(stack(fr), stack(sr));
      for (std::size_t i = 0; i < n; ++i) EXPECT_LE(oracle::relative_error(yp.at(i), y.at(perm[i]), 1e-300), 1e-9);
    }
  }
}

TEST(Gnn, PairwiseWithMaskedTargetReproducesScalarMessages) {
  Rng rng(11);
  RelationGnn p(kMicro, GnnVariant::gnn_p, rng);
  RelationGnn b(kMicro, GnnVariant::gnn_b, rng);
  // Share T and phi_h; give phi_e^p the layout [W_any | W_b].
  for (std::size_t l = 0; l < 2; ++l) {
    auto src = b.transform().weight(l).value.data();
    std::copy(src.begin(), src.end(), p.transform().weight(l).value.mutable_data().begin());
  }
  std::copy(b.phi_h().weight(0).value.data().begin(), b.phi_h().weight(0).value.data().end(),
            p.phi_h().weight(0).value.mutable_data().begin());
  const std::size_t x = kMicro.node_width(), m = kMicro.message_width;
  auto wp = p.phi_e().weight(0).value.mutable_data();
  auto wb = b.phi_e().weight(0).value.data();
  for (std::size_t o = 0; o < m; ++o)
    for (std::size_t i = 0; i < x; ++i) wp[o * 2 * x + x + i] = wb[o * x + i];
  fill_biases(b.phi_e(), rng);
  for (std::size_t l = 0; l < 2; ++l) {
    std::copy(b.phi_e().bias(l).value.data().begin(), b.phi_e().bias(l).value.data().end(),
              p.phi_e().bias(l).value.mutable_data().begin());
  }
  std::copy(b.phi_e().weight(1).value.data().begin(), b.phi_e().weight(1).value.data().end(),
            p.phi_e().weight(1).value.mutable_data().begin());

  const std::size_t n = 5;
  const Tensor f = random_matrix(n, kMicro.feature_width, rng), s = random_matrix(n, 6, rng);
  const auto pairwise = values(p.messages_pairwise(p.build_nodes(f, s), PairFusion::source_only));
  const auto ones = values(b.messages_scalar(b.build_nodes(f, s), AlphaMode::ones));
  for (std::size_t i = 0; i < ones.size(); ++i) EXPECT_NEAR(pairwise[i], ones[i], 1e-12);

  zero_weights(b.alpha_net());  // constant scores: softmax gives alpha = 1/N
  const auto uniform = values(b.messages_scalar(b.build_nodes(f, s)));
  for (std::size_t i = 0; i < ones.size(); ++i) EXPECT_NEAR(pairwise[i], n * uniform[i], 1e-12);
}

TEST(JointModel, SingleCandidateStudyAndDeterminism) {
  PhantomConfig cfg = tiny_phantom();
  Study s = generate_study(cfg, 0);
  s.candidates.resize(1);
  const PreparedStudy ps = prepare_study(s);
  Rng a(3), b(3);
  JointModel ma(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_p, a);
  JointModel mb(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_p, b);
  const auto pa = predict_joint(ma, ps, true, 8), pb = predict_joint(mb, ps, true, 8);
  ASSERT_EQ(pa.size(), 1u);
  EXPECT_EQ(pa, pb);
}

TEST(JointModel, FeatureWidthMismatchRejected) {
  Rng rng(1);
  EXPECT_THROW(JointModel(AppearanceConfig::scaled(16, true), kMicro, GnnVariant::gnn_p, rng), ShapeError);
}

TEST(JointModel, WarmStartScopes) {
  Rng rng(4);
  CnnClassifier cnn(AppearanceConfig::scaled(64, true), true, rng);
  const auto path = std::filesystem::temp_directory_path() / "lnrel_warm.ckpt";
  write_checkpoint(path, cnn.parameters());
  const Checkpoint ck = read_checkpoint(path);
  JointModel whole(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_p, rng);
  JointModel first(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_p, rng);
  EXPECT_EQ(warm_start(whole, ck, false), 24u);
  EXPECT_EQ(warm_start(first, ck, true), 2u);
  ParameterList pw = whole.parameters(), pf = first.parameters(), pc = cnn.parameters();
  for (std::size_t i = 0; i < 24; ++i) EXPECT_EQ(values(pw[i].param->value), values(pc[i].param->value));
  EXPECT_EQ(values(pf[0].param->value), values(pc[0].param->value));
  EXPECT_NE(values(pf[2].param->value), values(pc[2].param->value));
  std::filesystem::remove(path);
}

TEST(TrainJoint, AccumulatedGradientIsSumOfStudyGradients) {
  PhantomConfig cfg = tiny_phantom();
  std::vector<Study> studies;
  for (int i = 0; i < 3; ++i) studies.push_back(generate_study(cfg, i));
  std::vector<PreparedStudy> prepared;
  for (const auto& s : studies) prepared.push_back(prepare_study(s));
  Rng rng(5);
  JointModel model(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_p, rng);
  ParameterList params = model.parameters();
  auto loss = [&](const PreparedStudy& s) {
    return bce_loss(model.forward_study(s, true, 8), Tensor::from({s.size()}, s.labels()), 2.0);
  };
  std::vector<std::vector<double>> expected;
  for (const auto& np : params) expected.emplace_back(np.param->value.numel(), 0.0);
  for (const auto& s : prepared) {
    zero_grads(params);
    loss(s).backward();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto g = params[i].param->value.grad();
      for (std::size_t k = 0; k < g.size(); ++k) expected[i][k] += g[k];
    }
  }
  zero_grads(params);
  for (const auto& s : prepared) loss(s).backward();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = params[i].param->value.grad();
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], expected[i][k], 1e-12);
  }
}

TEST(TrainJoint, NineStudiesGiveOneFullStepAndOneFlush) {
  PhantomConfig cfg = tiny_phantom();
  std::vector<Study> studies;
  for (int i = 0; i < 9; ++i) studies.push_back(generate_study(cfg, i));
  std::vector<PreparedStudy> prepared;
  for (const auto& s : studies) prepared.push_back(prepare_study(s));
  Rng rng(6);
  JointModel model(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_b, rng);
  JointTrainConfig tc;
  tc.epochs = 1;
  tc.patch_size = 8;
  const TrainReport r = train_joint(model, prepared, {}, tc);
  EXPECT_EQ(r.optimizer_steps, 2);
  EXPECT_THROW(train_joint(model, {}, {}, tc), std::invalid_argument);
}

TEST(TrainJoint, LossDecreasesOverFirstSteps) {
  PhantomConfig cfg;
  cfg.volume_shape = {40, 64, 64};
  std::vector<Study> studies;
  for (int i = 0; i < 8; ++i) studies.push_back(generate_study(cfg, i));
  std::vector<PreparedStudy> prepared;
  for (const auto& s : studies) prepared.push_back(prepare_study(s));
  Rng rng(7);
  JointModel model(AppearanceConfig::scaled(64, true), kMicro, GnnVariant::gnn_p, rng);
  JointTrainConfig tc;
  tc.lr = 1e-3;
  tc.epochs = 3;
  tc.accumulation = 8;
  tc.patch_size = 16;
  std::vector<double> losses;
  const TrainReport r = train_joint(model, prepared, {}, tc, [&](const EpochLog& l) { losses.push_back(l.mean_loss); });
  ASSERT_EQ(losses.size(), 3u);
  EXPECT_LT(losses.back(), r.initial_loss);
}

TEST(Gradients, MicroPipelineEndToEnd) {
  const oracle::GradCheck r = oracle::micro_pipeline_gradients(1);
  EXPECT_GT(r.coordinates, 300u);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}
