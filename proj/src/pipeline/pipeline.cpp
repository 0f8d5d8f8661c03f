#include "lnrel/pipeline.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "lnrel/appearance_net.h"
#include "lnrel/checkpoint.h"
#include "lnrel/relation_gnn.h"
#include "lnrel/study_io.h"

namespace lnrel {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDatasetManifest = "dataset.manifest";
constexpr const char* kPhantomRecord = "phantom.cfg";

std::string num(double v) {
  char buf[400];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw PipelineError("config", "key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_switch(const std::string& key, const std::string& text) {
  if (text == "on" || text == "true") return true;
  if (text == "off" || text == "false") return false;
  throw PipelineError("config", "key '" + key + "': expected on/off, got '" + text + "'");
}

template <typename T, std::size_t N>
std::array<T, N> parse_triple(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  std::array<T, N> out{};
  std::string tok;
  for (std::size_t i = 0; i < N; ++i) {
    if (!(is >> tok)) throw PipelineError("config", "key '" + key + "': expected " + std::to_string(N) + " values");
    out[i] = parse_number<T>(key, tok);
  }
  if (is >> tok) throw PipelineError("config", "key '" + key + "': too many values");
  return out;
}

std::string phantom_section(const PhantomConfig& p) {
  std::ostringstream os;
  os << "phantom.studies = " << p.studies << '\n'
     << "phantom.volume_shape = " << p.volume_shape[0] << ' ' << p.volume_shape[1] << ' ' << p.volume_shape[2] << '\n'
     << "phantom.spacing = " << num(p.spacing[0]) << ' ' << num(p.spacing[1]) << ' ' << num(p.spacing[2]) << '\n'
     << "phantom.candidates_per_study = " << num(p.candidates_per_study) << '\n'
     << "phantom.candidates_spread = " << num(p.candidates_spread) << '\n'
     << "phantom.fp_per_study = " << num(p.fp_per_study) << '\n'
     << "phantom.pathway_count = " << p.pathway_count << '\n'
     << "phantom.pathway_positive_rate = " << num(p.pathway_positive_rate) << '\n'
     << "phantom.label_correlation = " << num(p.label_correlation) << '\n'
     << "phantom.ct_noise_hu = " << num(p.ct_noise_hu) << '\n'
     << "phantom.pet_noise = " << num(p.pet_noise) << '\n'
     << "phantom.uptake_spread = " << num(p.uptake_spread) << '\n'
     << "phantom.seed = " << p.seed << '\n';
  return os.str();
}

void set_key(PipelineConfig& c, const std::string& key, const std::string& v) {
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"phantom.studies", [&](auto& s) { c.phantom.studies = parse_number<int>(key, s); }},
      {"phantom.volume_shape", [&](auto& s) { c.phantom.volume_shape = parse_triple<int, 3>(key, s); }},
      {"phantom.spacing", [&](auto& s) { c.phantom.spacing = parse_triple<double, 3>(key, s); }},
      {"phantom.candidates_per_study", [&](auto& s) { c.phantom.candidates_per_study = parse_number<double>(key, s); }},
      {"phantom.candidates_spread", [&](auto& s) { c.phantom.candidates_spread = parse_number<double>(key, s); }},
      {"phantom.fp_per_study", [&](auto& s) { c.phantom.fp_per_study = parse_number<double>(key, s); }},
      {"phantom.pathway_count", [&](auto& s) { c.phantom.pathway_count = parse_number<int>(key, s); }},
      {"phantom.pathway_positive_rate", [&](auto& s) { c.phantom.pathway_positive_rate = parse_number<double>(key, s); }},
      {"phantom.label_correlation", [&](auto& s) { c.phantom.label_correlation = parse_number<double>(key, s); }},
      {"phantom.ct_noise_hu", [&](auto& s) { c.phantom.ct_noise_hu = parse_number<double>(key, s); }},
      {"phantom.pet_noise", [&](auto& s) { c.phantom.pet_noise = parse_number<double>(key, s); }},
      {"phantom.uptake_spread", [&](auto& s) { c.phantom.uptake_spread = parse_number<double>(key, s); }},
      {"phantom.seed", [&](auto& s) { c.phantom.seed = parse_number<std::uint64_t>(key, s); }},
      {"model.pet", [&](auto& s) { c.model.pet = parse_switch(key, s); }},
      {"model.width_divisor", [&](auto& s) { c.model.width_divisor = parse_number<int>(key, s); }},
      {"model.min_block_width", [&](auto& s) { c.model.min_block_width = parse_number<int>(key, s); }},
      {"model.patch_size", [&](auto& s) { c.model.patch_size = parse_number<int>(key, s); }},
      {"train.cnn_lr", [&](auto& s) { c.train.cnn_lr = parse_number<double>(key, s); }},
      {"train.cnn_epochs", [&](auto& s) { c.train.cnn_epochs = parse_number<int>(key, s); }},
      {"train.batch", [&](auto& s) { c.train.batch = parse_number<int>(key, s); }},
      {"train.gnn_lr", [&](auto& s) { c.train.gnn_lr = parse_number<double>(key, s); }},
      {"train.gnn_epochs", [&](auto& s) { c.train.gnn_epochs = parse_number<int>(key, s); }},
      {"train.accumulation", [&](auto& s) { c.train.accumulation = parse_number<int>(key, s); }},
      {"train.positive_weight", [&](auto& s) { c.train.positive_weight = parse_number<double>(key, s); }},
      {"train.warm_start",
       [&](auto& s) {
         if (s != "backbone" && s != "first_layer") {
           throw PipelineError("config", "key 'train.warm_start': expected backbone or first_layer, got '" + s + "'");
         }
         c.train.warm_start_first_layer = s == "first_layer";
       }},
      {"train.seed", [&](auto& s) { c.train.seed = parse_number<std::uint64_t>(key, s); }},
      {"paths.dataset", [&](auto& s) { c.paths.dataset = s; }},
      {"paths.checkpoints", [&](auto& s) { c.paths.checkpoints = s; }},
      {"paths.results", [&](auto& s) { c.paths.results = s; }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw PipelineError("config", "unknown key '" + key + "'");
  it->second(v);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("io", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw PipelineError("io", "cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw PipelineError("io", "cannot create directory " + dir.string());
}

void emit(const LogSink& log, const std::string& line) {
  if (log) log(line);
}

struct Dataset {
  std::vector<Study> studies;
  std::vector<SplitPart> parts;

  std::vector<PreparedStudy> prepared(SplitPart part) const {
    std::vector<const Study*> picked;
    for (std::size_t i = 0; i < studies.size(); ++i) {
      if (parts[i] == part) picked.push_back(&studies[i]);
    }
    return prepare_studies(picked);
  }
};

Dataset load_dataset(const PipelineConfig& config) {
  const fs::path dir(config.paths.dataset);
  const fs::path manifest_path = dir / kDatasetManifest;
  if (!fs::exists(manifest_path)) {
    throw PipelineError("dependency", "no dataset at " + dir.string() + "; run generate first");
  }
  if (read_text(dir / kPhantomRecord) != phantom_section(config.phantom)) {
    throw PipelineError("data", "dataset at " + dir.string() + " was generated with a different phantom config");
  }
  Dataset data;
  try {
    const DatasetManifest manifest = read_dataset_manifest(manifest_path);
    for (const DatasetEntry& e : manifest.studies) {
      data.studies.push_back(read_study(dir / e.manifest));
      data.parts.push_back(e.split);
    }
  } catch (const FormatError& e) {
    throw PipelineError("data", e.what());
  }
  return data;
}

AppearanceConfig appearance_config(const ModelSettings& m) {
  return AppearanceConfig::scaled(m.width_divisor, m.pet, m.min_block_width);
}

fs::path checkpoint_path(const PipelineConfig& config, Variant variant) {
  return fs::path(config.paths.checkpoints) / (checkpoint_name(variant, config.model.pet) + ".ckpt");
}

GnnVariant gnn_variant(Variant v) { return v == Variant::cnn_gnn_b ? GnnVariant::gnn_b : GnnVariant::gnn_p; }

Checkpoint require_checkpoint(const PipelineConfig& config, Variant variant) {
  const fs::path path = checkpoint_path(config, variant);
  if (!fs::exists(path)) {
    throw PipelineError("dependency", "missing checkpoint " + path.string() + "; run train --variant " +
                                          to_string(variant) + " first");
  }
  try {
    return read_checkpoint(path);
  } catch (const FormatError& e) {
    throw PipelineError("data", e.what());
  }
}

// Either CNN checkpoint carries the appearance weights; the prior-aware one
// is preferred because the joint model also consumes priors.
Checkpoint warm_start_source(const PipelineConfig& config) {
  for (Variant v : {Variant::cnn_sp, Variant::cnn}) {
    if (fs::exists(checkpoint_path(config, v))) return require_checkpoint(config, v);
  }
  throw PipelineError("dependency", "GNN variants warm-start from a CNN checkpoint (" +
                                        checkpoint_path(config, Variant::cnn_sp).string() + " or " +
                                        checkpoint_path(config, Variant::cnn).string() +
                                        "); run train --variant cnn first");
}

std::string format_log(const TrainReport& report) {
  std::ostringstream os;
  os << "initial_loss " << num(report.initial_loss) << '\n';
  for (const EpochLog& e : report.epochs) {
    os << "epoch " << e.epoch << " loss " << num(e.mean_loss) << " val_f1 " << num(e.val_f1) << " steps "
       << e.optimizer_steps << '\n';
  }
  os << "best_epoch " << report.best_epoch << " best_val_f1 " << num(report.best_val_f1) << '\n';
  return os.str();
}

void load_all(const Checkpoint& ck, const ParameterList& params, const fs::path& source) {
  try {
    if (load_parameters(ck, params) != params.size()) throw std::invalid_argument("parameter count mismatch");
  } catch (const std::exception& e) {
    throw PipelineError("data", source.string() + " does not match the configured model: " + e.what());
  }
}

}  // namespace

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::cnn: return "cnn";
    case Variant::cnn_sp: return "cnn_sp";
    case Variant::cnn_gnn_b: return "cnn_gnn_b";
    case Variant::cnn_gnn_p: return "cnn_gnn_p";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  for (Variant v : {Variant::cnn, Variant::cnn_sp, Variant::cnn_gnn_b, Variant::cnn_gnn_p}) {
    if (to_string(v) == text) return v;
  }
  throw PipelineError("config", "unknown variant '" + text + "' (cnn, cnn_sp, cnn_gnn_b, cnn_gnn_p)");
}

bool is_gnn(Variant variant) { return variant == Variant::cnn_gnn_b || variant == Variant::cnn_gnn_p; }
bool uses_prior(Variant variant) { return variant != Variant::cnn; }

PipelineConfig PipelineConfig::desk() { return {}; }

PipelineConfig PipelineConfig::paper() {
  PipelineConfig c;
  c.profile = "paper";
  c.model.width_divisor = 1;
  c.model.min_block_width = 1;
  c.model.patch_size = 48;
  c.train.cnn_lr = 1e-4;
  c.train.cnn_epochs = 10;
  c.train.gnn_lr = 1e-4;
  c.train.gnn_epochs = 10;
  c.train.accumulation = 8;
  return c;
}

PipelineConfig PipelineConfig::for_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw PipelineError("config", "unknown profile '" + name + "' (desk, paper)");
}

void PipelineConfig::validate() const {
  try {
    phantom.validate();
  } catch (const std::invalid_argument& e) {
    throw PipelineError("config", e.what());
  }
  const int d = model.width_divisor;
  if (d < 1 || 16 % d != 0) {
    throw PipelineError("config", "model.width_divisor must divide every default layer width (1, 2, 4, 8 or 16)");
  }
  if (model.min_block_width < 1) throw PipelineError("config", "model.min_block_width must be positive");
  if (model.patch_size < 8) throw PipelineError("config", "model.patch_size must be at least 8");
  if (!(train.cnn_lr > 0.0) || !(train.gnn_lr > 0.0)) throw PipelineError("config", "learning rates must be positive");
  if (train.cnn_epochs < 1 || train.gnn_epochs < 1) throw PipelineError("config", "epoch counts must be positive");
  if (train.batch < 1 || train.accumulation < 1) throw PipelineError("config", "batch and accumulation must be positive");
}

std::string format_config(const PipelineConfig& c) {
  std::ostringstream os;
  os << "profile = " << c.profile << '\n'
     << phantom_section(c.phantom)
     << "model.pet = " << (c.model.pet ? "on" : "off") << '\n'
     << "model.width_divisor = " << c.model.width_divisor << '\n'
     << "model.min_block_width = " << c.model.min_block_width << '\n'
     << "model.patch_size = " << c.model.patch_size << '\n'
     << "train.cnn_lr = " << num(c.train.cnn_lr) << '\n'
     << "train.cnn_epochs = " << c.train.cnn_epochs << '\n'
     << "train.batch = " << c.train.batch << '\n'
     << "train.gnn_lr = " << num(c.train.gnn_lr) << '\n'
     << "train.gnn_epochs = " << c.train.gnn_epochs << '\n'
     << "train.accumulation = " << c.train.accumulation << '\n'
     << "train.positive_weight = " << num(c.train.positive_weight) << '\n'
     << "train.warm_start = " << (c.train.warm_start_first_layer ? "first_layer" : "backbone") << '\n'
     << "train.seed = " << c.train.seed << '\n'
     << "paths.dataset = " << c.paths.dataset << '\n'
     << "paths.checkpoints = " << c.paths.checkpoints << '\n'
     << "paths.results = " << c.paths.results << '\n';
  return os.str();
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  bool seen_key = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw PipelineError("config", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "profile") {
      if (seen_key) throw PipelineError("config", "line " + std::to_string(line_no) + ": profile must come first");
      config = PipelineConfig::for_profile(value);
    } else {
      set_key(config, key, value);
    }
    seen_key = true;
  }
  config.validate();
  return config;
}

PipelineConfig load_config(const fs::path& path) { return parse_config(read_text(path)); }

void override_seed(PipelineConfig& config, std::uint64_t seed) {
  config.phantom.seed = seed;
  config.train.seed = seed;
}

void override_out(PipelineConfig& config, const fs::path& out) {
  config.paths.dataset = (out / "dataset").string();
  config.paths.checkpoints = (out / "checkpoints").string();
  config.paths.results = (out / "results").string();
}

std::string checkpoint_name(Variant variant, bool pet) { return to_string(variant) + (pet ? "_ctpet" : "_ct"); }

void cmd_generate(const PipelineConfig& config, const LogSink& log) {
  config.validate();
  const PhantomConfig& pc = config.phantom;
  DatasetSplit split;
  try {
    split = split_dataset(static_cast<std::size_t>(pc.studies), pc.seed);
  } catch (const std::invalid_argument& e) {
    throw PipelineError("config", std::string(e.what()) + "; use at least 10 studies");
  }
  const fs::path dir(config.paths.dataset);
  ensure_dir(dir);
  std::vector<SplitPart> parts(pc.studies);
  for (auto i : split.val) parts[i] = SplitPart::val;
  for (auto i : split.test) parts[i] = SplitPart::test;
  DatasetManifest manifest;
  manifest.split_seed = pc.seed;
  for (int i = 0; i < pc.studies; ++i) {
    const Study study = generate_study(pc, i);
    try {
      write_study(dir / study.study_id, study);
    } catch (const std::exception& e) {
      throw PipelineError("io", e.what());
    }
    manifest.studies.push_back({study.study_id + "/study.manifest", parts[i]});
  }
  try {
    write_dataset_manifest(dir / kDatasetManifest, manifest);
  } catch (const std::exception& e) {
    throw PipelineError("io", e.what());
  }
  write_text(dir / kPhantomRecord, phantom_section(pc));
  emit(log, "generated " + std::to_string(pc.studies) + " studies (train " + std::to_string(split.train.size()) +
                ", val " + std::to_string(split.val.size()) + ", test " + std::to_string(split.test.size()) +
                ") in " + dir.string());
}

void cmd_train(const PipelineConfig& config, Variant variant, const LogSink& log) {
  config.validate();
  std::optional<Checkpoint> warm;
  if (is_gnn(variant)) warm = warm_start_source(config);
  const Dataset data = load_dataset(config);
  const auto train = data.prepared(SplitPart::train), val = data.prepared(SplitPart::val);
  const ModelSettings& m = config.model;
  const auto on_epoch = [&](const EpochLog& e) {
    emit(log, to_string(variant) + " epoch " + std::to_string(e.epoch) + " loss " + num(e.mean_loss) + " val_f1 " +
                  num(e.val_f1));
  };

  Rng rng(config.train.seed);
  TrainReport report;
  ParameterList params;
  CnnClassifier cnn;
  JointModel joint;
  if (!is_gnn(variant)) {
    cnn = CnnClassifier(appearance_config(m), uses_prior(variant), rng);
    CnnTrainConfig tc;
    tc.lr = config.train.cnn_lr;
    tc.epochs = config.train.cnn_epochs;
    tc.batch_size = config.train.batch;
    tc.use_pet = m.pet;
    tc.patch_size = m.patch_size;
    tc.seed = config.train.seed;
    tc.positive_weight = config.train.positive_weight;
    report = train_cnn(cnn, train, val, tc, on_epoch);
    params = cnn.parameters();
  } else {
    joint = JointModel(appearance_config(m), GnnDims::scaled(m.width_divisor), gnn_variant(variant), rng);
    warm_start(joint, *warm, config.train.warm_start_first_layer);
    joint.gnn().zero_output_layers();
    JointTrainConfig tc;
    tc.lr = config.train.gnn_lr;
    tc.epochs = config.train.gnn_epochs;
    tc.accumulation = config.train.accumulation;
    tc.use_pet = m.pet;
    tc.patch_size = m.patch_size;
    tc.seed = config.train.seed;
    tc.positive_weight = config.train.positive_weight;
    report = train_joint(joint, train, val, tc, on_epoch);
    params = joint.parameters();
  }

  ensure_dir(config.paths.checkpoints);
  const fs::path ckpt = checkpoint_path(config, variant);
  try {
    write_checkpoint(ckpt, params);
  } catch (const std::exception& e) {
    throw PipelineError("io", e.what());
  }
  fs::path log_path = ckpt;
  write_text(log_path.replace_extension(".log"), format_log(report));
  emit(log, "wrote " + ckpt.string());
}

std::vector<SummaryRow> cmd_eval(const PipelineConfig& config, const std::vector<Variant>& variants,
                                 const LogSink& log) {
  config.validate();
  if (variants.empty()) throw PipelineError("config", "no variants to evaluate");
  std::vector<Checkpoint> checkpoints;
  for (Variant v : variants) checkpoints.push_back(require_checkpoint(config, v));
  const Dataset data = load_dataset(config);
  const auto test = data.prepared(SplitPart::test);
  const ModelSettings& m = config.model;
  ensure_dir(config.paths.results);

  std::vector<SummaryRow> rows;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const Variant v = variants[k];
    Rng rng(config.train.seed);
    std::vector<ScoredCandidate> scored;
    auto score = [&](const auto& predict) {
      for (const PreparedStudy& s : test) {
        const auto p = predict(s);
        for (std::size_t i = 0; i < p.size(); ++i) {
          scored.push_back({s.study->study_id, p[i], s.study->candidates[i].positive() ? 1 : 0});
        }
      }
    };
    if (!is_gnn(v)) {
      CnnClassifier model(appearance_config(m), uses_prior(v), rng);
      load_all(checkpoints[k], model.parameters(), checkpoint_path(config, v));
      score([&](const PreparedStudy& s) { return predict_cnn(model, s, m.pet, m.patch_size); });
    } else {
      JointModel model(appearance_config(m), GnnDims::scaled(m.width_divisor), gnn_variant(v), rng);
      load_all(checkpoints[k], model.parameters(), checkpoint_path(config, v));
      score([&](const PreparedStudy& s) { return predict_joint(model, s, m.pet, m.patch_size); });
    }
    const FrocCurve curve = froc_curve(scored, test.size());
    const F1Result best = best_f1(scored);
    SummaryRow row;
    row.variant = to_string(v);
    row.modality = m.pet ? "CT+PET" : "CT";
    row.spatial_prior = uses_prior(v);
    row.f1 = best.f1;
    row.threshold = best.threshold;
    row.f1_at_half = f1_at_threshold(scored, 0.5).f1;
    row.mfroc = mfroc(curve);
    for (std::size_t i = 0; i < kDefaultFrocPoints.size(); ++i) row.sensitivity[i] = sensitivity_at(curve, kDefaultFrocPoints[i]);
    write_text(fs::path(config.paths.results) / ("froc_" + checkpoint_name(v, m.pet) + ".tsv"), format_froc(curve));
    emit(log, row.variant + " " + row.modality + " F1 " + num(row.f1) + " mFROC " + num(row.mfroc));
    rows.push_back(row);
  }
  write_text(fs::path(config.paths.results) / "summary.tsv", format_summary(rows));
  return rows;
}

std::string cmd_report(const PipelineConfig& config) {
  const fs::path path = fs::path(config.paths.results) / "summary.tsv";
  if (!fs::exists(path)) throw PipelineError("dependency", "no summary at " + path.string() + "; run eval first");
  std::istringstream is(read_text(path));
  std::string line;
  std::getline(is, line);
  std::ostringstream os;
  os << std::left << std::setw(12) << "Method" << std::setw(9) << "Input" << std::setw(6) << "S.P." << std::right
     << std::setw(8) << "F1" << std::setw(8) << "F1@0.5" << std::setw(8) << "mFROC" << '\n';
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::istringstream fields(line);
    for (std::string cell; std::getline(fields, cell, '\t');) f.push_back(cell);
    if (f.size() != 7 + kDefaultFrocPoints.size()) {
      throw PipelineError("data", path.string() + ": malformed row '" + line + "'");
    }
    os << std::left << std::setw(12) << f[0] << std::setw(9) << f[1] << std::setw(6) << f[2] << std::right
       << std::fixed << std::setprecision(3) << std::setw(8) << parse_number<double>("f1", f[3]) << std::setw(8)
       << parse_number<double>("f1_at_0.5", f[5]) << std::setw(8) << parse_number<double>("mfroc", f[6]) << '\n';
  }
  return os.str();
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "variant\tmodality\tspatial_prior\tf1\tthreshold\tf1_at_0.5\tmfroc";
  for (double fp : kDefaultFrocPoints) os << "\tsens@" << num(fp);
  os << '\n';
  for (const SummaryRow& r : rows) {
    os << r.variant << '\t' << r.modality << '\t' << (r.spatial_prior ? "yes" : "no") << '\t' << num(r.f1) << '\t'
       << num(r.threshold) << '\t' << num(r.f1_at_half) << '\t' << num(r.mfroc);
    for (double v : r.sensitivity) os << '\t' << num(v);
    os << '\n';
  }
  return os.str();
}

std::string format_froc(const FrocCurve& curve) {
  std::ostringstream os;
  os << "threshold\tfp_per_study\tsensitivity\n";
  for (const FrocPoint& p : curve.points) {
    os << num(p.threshold) << '\t' << num(p.fp_per_study) << '\t' << num(p.sensitivity) << '\n';
  }
  return os.str();
}

}  // namespace lnrel
