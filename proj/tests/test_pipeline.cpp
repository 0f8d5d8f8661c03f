#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lnrel/pipeline.h"

using namespace lnrel;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig micro_config(const fs::path& root) {
  PipelineConfig c;
  c.phantom.studies = 10;
  c.phantom.volume_shape = {24, 40, 40};
  c.phantom.candidates_per_study = 8;
  c.phantom.candidates_spread = 1;
  c.phantom.fp_per_study = 4;
  c.model.patch_size = 16;
  c.train.cnn_epochs = 1;
  c.train.gnn_epochs = 1;
  override_out(c, root);
  return c;
}

std::string error_category(const std::function<void()>& f) {
  try {
    f();
  } catch (const PipelineError& e) {
    return e.category();
  }
  return "none";
}

class PipelineRun : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("lnrel_pipeline_" + std::string(
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

}  // namespace

TEST(PipelineConfig, DeskGolden) {
  const std::string expected =
      "profile = desk\n"
      "phantom.studies = 100\n"
      "phantom.volume_shape = 64 96 96\n"
      "phantom.spacing = 1 1 1\n"
      "phantom.candidates_per_study = 25\n"
      "phantom.candidates_spread = 3\n"
      "phantom.fp_per_study = 15\n"
      "phantom.pathway_count = 3\n"
      "phantom.pathway_positive_rate = 0.6\n"
      "phantom.label_correlation = 0.7\n"
      "phantom.ct_noise_hu = 20\n"
      "phantom.pet_noise = 0.2\n"
      "phantom.uptake_spread = 0.5\n"
      "phantom.seed = 1\n"
      "model.pet = on\n"
      "model.width_divisor = 16\n"
      "model.min_block_width = 2\n"
      "model.patch_size = 32\n"
      "train.cnn_lr = 0.001\n"
      "train.cnn_epochs = 6\n"
      "train.batch = 32\n"
      "train.gnn_lr = 0.0003\n"
      "train.gnn_epochs = 8\n"
      "train.accumulation = 1\n"
      "train.positive_weight = 0\n"
      "train.warm_start = backbone\n"
      "train.seed = 1\n"
      "paths.dataset = data\n"
      "paths.checkpoints = checkpoints\n"
      "paths.results = results\n";
  EXPECT_EQ(format_config(PipelineConfig::desk()), expected);
  EXPECT_EQ(format_config(parse_config(expected)), expected);
}

TEST(PipelineConfig, RoundTripAndOverrides) {
  PipelineConfig c = PipelineConfig::paper();
  c.phantom.label_correlation = 0.35;
  c.model.pet = false;
  c.paths.results = "out dir/results";
  EXPECT_EQ(format_config(parse_config(format_config(c))), format_config(c));
  const PipelineConfig p = parse_config("profile = paper  # full widths\n\ntrain.seed = 9\n");
  EXPECT_EQ(p.model.width_divisor, 1);
  EXPECT_EQ(p.model.patch_size, 48);
  EXPECT_EQ(p.train.accumulation, 8);
  EXPECT_EQ(p.train.seed, 9u);
  override_seed(c, 4);
  EXPECT_EQ(c.phantom.seed, 4u);
  EXPECT_EQ(c.train.seed, 4u);
}

TEST(PipelineConfig, Rejections) {
  EXPECT_EQ(error_category([] { parse_config("model.width = 3\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("model.width_divisor = 3\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("train.cnn_lr = 0\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("train.seed = 1\nprofile = paper\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("model.pet = maybe\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("phantom.volume_shape = 1 2\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("no equals sign\n"); }), "config");
  EXPECT_EQ(error_category([] { parse_variant("gnn"); }), "config");
  EXPECT_EQ(error_category([] { parse_config("train.warm_start = half\n"); }), "config");
  EXPECT_TRUE(parse_config("train.warm_start = first_layer\n").train.warm_start_first_layer);
}

TEST(Variant, NamesAndCheckpoints) {
  for (Variant v : {Variant::cnn, Variant::cnn_sp, Variant::cnn_gnn_b, Variant::cnn_gnn_p}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_EQ(checkpoint_name(Variant::cnn_gnn_p, false), "cnn_gnn_p_ct");
  EXPECT_FALSE(uses_prior(Variant::cnn));
  EXPECT_TRUE(is_gnn(Variant::cnn_gnn_b));
}

TEST_F(PipelineRun, GenerateIsIdempotentAndRejectsTinyDatasets) {
  PipelineConfig c = micro_config(root_);
  cmd_generate(c);
  const fs::path manifest = fs::path(c.paths.dataset) / "dataset.manifest";
  const std::string first = slurp(manifest), vol = slurp(fs::path(c.paths.dataset) / "study_0003" / "pet.vol");
  cmd_generate(c);
  EXPECT_EQ(slurp(manifest), first);
  EXPECT_EQ(slurp(fs::path(c.paths.dataset) / "study_0003" / "pet.vol"), vol);
  EXPECT_NE(first.find("studies = 10"), std::string::npos);

  c.phantom.studies = 3;
  EXPECT_EQ(error_category([&] { cmd_generate(c); }), "config");
}

TEST_F(PipelineRun, DependencyOrderEnforced) {
  PipelineConfig c = micro_config(root_);
  EXPECT_EQ(error_category([&] { cmd_train(c, Variant::cnn); }), "dependency");
  cmd_generate(c);
  EXPECT_EQ(error_category([&] { cmd_train(c, Variant::cnn_gnn_p); }), "dependency");
  EXPECT_EQ(error_category([&] { cmd_eval(c, {Variant::cnn}); }), "dependency");
  EXPECT_EQ(error_category([&] { cmd_report(c); }), "dependency");
  cmd_train(c, Variant::cnn);
  cmd_train(c, Variant::cnn_gnn_p);
  EXPECT_TRUE(fs::exists(fs::path(c.paths.checkpoints) / "cnn_gnn_p_ctpet.ckpt"));
  EXPECT_TRUE(fs::exists(fs::path(c.paths.checkpoints) / "cnn_gnn_p_ctpet.log"));

  PipelineConfig other = c;
  other.phantom.seed = 2;
  EXPECT_EQ(error_category([&] { cmd_train(other, Variant::cnn); }), "data");
}

TEST_F(PipelineRun, EvalSummaryMatchesCurves) {
  PipelineConfig c = micro_config(root_);
  cmd_generate(c);
  cmd_train(c, Variant::cnn_sp);
  cmd_train(c, Variant::cnn_gnn_b);
  const auto rows = cmd_eval(c, {Variant::cnn_sp, Variant::cnn_gnn_b});
  ASSERT_EQ(rows.size(), 2u);
  const std::string summary = slurp(fs::path(c.paths.results) / "summary.tsv");
  EXPECT_EQ(summary, format_summary(rows));
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);

  // Re-read the emitted curve and recompute mFROC from it.
  std::istringstream is(slurp(fs::path(c.paths.results) / "froc_cnn_gnn_b_ctpet.tsv"));
  std::string line;
  std::getline(is, line);
  FrocCurve curve;
  while (std::getline(is, line)) {
    FrocPoint p;
    std::istringstream(line) >> p.threshold >> p.fp_per_study >> p.sensitivity;
    curve.points.push_back(p);
  }
  EXPECT_DOUBLE_EQ(mfroc(curve), rows[1].mfroc);
  EXPECT_DOUBLE_EQ(sensitivity_at(curve, 2.0), rows[1].sensitivity[0]);

  const std::string report = cmd_report(c);
  EXPECT_NE(report.find("cnn_gnn_b"), std::string::npos);
  EXPECT_NE(report.find("CT+PET"), std::string::npos);
}
