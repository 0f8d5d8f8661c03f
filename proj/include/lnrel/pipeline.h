#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lnrel/evaluation.h"
#include "lnrel/phantom.h"

namespace lnrel {

// Failure of a pipeline command. `category` is a stable machine-readable tag:
// config, io, dependency or data.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

enum class Variant { cnn, cnn_sp, cnn_gnn_b, cnn_gnn_p };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& text);
bool is_gnn(Variant variant);
bool uses_prior(Variant variant);

struct ModelSettings {
  bool pet = true;
  int width_divisor = 16;
  int min_block_width = 2;
  int patch_size = 32;
};

struct TrainSettings {
  double cnn_lr = 1e-3;
  int cnn_epochs = 6;
  int batch = 32;
  double gnn_lr = 3e-4;
  int gnn_epochs = 8;
  int accumulation = 1;
  double positive_weight = 0.0;  // <= 0: #neg / #pos of the training split
  bool warm_start_first_layer = false;  // load only the first conv instead of the backbone
  std::uint64_t seed = 1;
};

struct PathSettings {
  std::string dataset = "data";
  std::string checkpoints = "checkpoints";
  std::string results = "results";
};

struct PipelineConfig {
  std::string profile = "desk";
  PhantomConfig phantom;
  ModelSettings model;
  TrainSettings train;
  PathSettings paths;

  // Desk scale: width divisor 16, 32^3 patches, short schedules, one Adam step
  // per study. "paper": full widths, 48^3 patches and the reference optimiser
  // settings.
  static PipelineConfig desk();
  static PipelineConfig paper();
  static PipelineConfig for_profile(const std::string& name);

  // Throws PipelineError("config") on any invalid field.
  void validate() const;
};

// Flat "section.key = value" text, one key per line, '#' comments. Parsing
// starts from the profile named by an optional leading `profile` key and
// rejects unknown keys.
std::string format_config(const PipelineConfig& config);
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// Applies --seed: phantom, split and training seeds all follow it.
void override_seed(PipelineConfig& config, std::uint64_t seed);
// Applies --out: dataset, checkpoints and results become subdirectories.
void override_out(PipelineConfig& config, const std::filesystem::path& out);

using LogSink = std::function<void(const std::string&)>;

// Writes study volumes, per-study manifests, the dataset manifest with the
// split, and a copy of the phantom section used to produce them.
void cmd_generate(const PipelineConfig& config, const LogSink& log = {});

// Trains one variant and writes <checkpoints>/<name>.ckpt and <name>.log,
// where name is checkpoint_name(). GNN variants warm-start their appearance
// network from the CNN checkpoint of the same modality.
void cmd_train(const PipelineConfig& config, Variant variant, const LogSink& log = {});

struct SummaryRow {
  std::string variant;
  std::string modality;  // "CT" or "CT+PET"
  bool spatial_prior = false;
  double f1 = 0.0;  // at the best threshold
  double threshold = 0.0;
  double f1_at_half = 0.0;
  double mfroc = 0.0;
  std::array<double, kDefaultFrocPoints.size()> sensitivity{};  // at each mFROC operating point
};

// Scores the test split with each trained variant, writes
// <results>/froc_<name>.tsv per variant and <results>/summary.tsv.
std::vector<SummaryRow> cmd_eval(const PipelineConfig& config, const std::vector<Variant>& variants,
                                 const LogSink& log = {});

// Renders <results>/summary.tsv as a fixed-width table.
std::string cmd_report(const PipelineConfig& config);

std::string checkpoint_name(Variant variant, bool pet);
std::string format_summary(const std::vector<SummaryRow>& rows);
std::string format_froc(const FrocCurve& curve);

}  // namespace lnrel
