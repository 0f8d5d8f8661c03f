#include "lnrel/study_io.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lnrel {

namespace fs = std::filesystem;

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return is;
}

template <typename T>
void write_grid(const fs::path& path, const Grid3<T>& grid, const char* type) {
  auto os = open_out(path);
  os << "LNREL-VOLUME 1\n"
     << "shape " << grid.shape[0] << ' ' << grid.shape[1] << ' ' << grid.shape[2] << '\n'
     << "spacing " << exact(grid.spacing[0]) << ' ' << exact(grid.spacing[1]) << ' ' << exact(grid.spacing[2]) << '\n'
     << "type " << type << '\n'
     << "end\n";
  if constexpr (sizeof(T) == 1) {
    os.write(reinterpret_cast<const char*>(grid.values.data()), static_cast<std::streamsize>(grid.values.size()));
  } else {
    std::vector<char> bytes(grid.values.size() * 4);
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(grid.values[i]);
      for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

template <typename T>
Grid3<T> read_grid(const fs::path& path, const char* expected_type) {
  auto is = open_in(path);
  std::string line, key;
  Index3 shape{};
  Vec3 spacing{};
  std::string type;
  std::getline(is, line);
  if (line != "LNREL-VOLUME 1") throw FormatError(path.string() + ": not a volume file");
  std::getline(is, line);
  {
    std::istringstream ls(line);
    if (!(ls >> key >> shape[0] >> shape[1] >> shape[2]) || key != "shape") throw FormatError(path.string() + ": bad shape");
  }
  std::getline(is, line);
  {
    std::istringstream ls(line);
    if (!(ls >> key >> spacing[0] >> spacing[1] >> spacing[2]) || key != "spacing") {
      throw FormatError(path.string() + ": bad spacing");
    }
  }
  std::getline(is, line);
  {
    std::istringstream ls(line);
    if (!(ls >> key >> type) || key != "type") throw FormatError(path.string() + ": bad type line");
  }
  if (type != expected_type) throw FormatError(path.string() + ": expected type " + expected_type + ", found " + type);
  if (!std::getline(is, line) || line != "end") throw FormatError(path.string() + ": missing end marker");
  Grid3<T> grid(shape, spacing);
  const std::size_t n = grid.values.size();
  std::vector<char> bytes(n * sizeof(T));
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) throw FormatError(path.string() + ": truncated voxel data");
  if constexpr (sizeof(T) == 1) {
    std::memcpy(grid.values.data(), bytes.data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
      grid.values[i] = std::bit_cast<float>(bits);
    }
  }
  return grid;
}

// "key = value" line; returns false when the line has another shape.
bool split_assignment(const std::string& line, std::string& key, std::string& value) {
  const auto eq = line.find(" = ");
  if (eq == std::string::npos) return false;
  key = line.substr(0, eq);
  value = line.substr(eq + 3);
  return true;
}

std::string expect_value(std::istream& is, const std::string& key, const fs::path& path) {
  std::string line, k, v;
  if (!std::getline(is, line) || !split_assignment(line, k, v) || k != key) {
    throw FormatError(path.string() + ": expected '" + key + " = ...', found '" + line + "'");
  }
  return v;
}

}  // namespace

void write_volume(const fs::path& path, const Volume3D& volume) { write_grid(path, volume, "f32"); }
void write_mask(const fs::path& path, const BinaryMask& mask) { write_grid(path, mask, "u8"); }
Volume3D read_volume(const fs::path& path) { return read_grid<float>(path, "f32"); }
BinaryMask read_mask(const fs::path& path) { return read_grid<std::uint8_t>(path, "u8"); }

void write_study(const fs::path& dir, const Study& study) {
  validate_study(study);
  fs::create_directories(dir);
  write_volume(dir / "ct.vol", study.ct);
  write_volume(dir / "pet.vol", study.pet);
  write_mask(dir / "tumor.vol", study.tumor_mask);
  write_mask(dir / "lung.vol", study.lung_mask);
  auto os = open_out(dir / "study.manifest");
  os << "LNREL-STUDY 1\n"
     << "study_id = " << study.study_id << '\n'
     << "seed = " << study.seed << '\n'
     << "ct = ct.vol\n"
     << "pet = pet.vol\n"
     << "tumor_mask = tumor.vol\n"
     << "lung_mask = lung.vol\n"
     << "candidates = " << study.candidates.size() << '\n';
  for (std::size_t i = 0; i < study.candidates.size(); ++i) {
    const Candidate& c = study.candidates[i];
    os << "candidate " << i << " center " << c.center[0] << ' ' << c.center[1] << ' ' << c.center[2] << " bbox "
       << c.bbox.lo[0] << ' ' << c.bbox.lo[1] << ' ' << c.bbox.lo[2] << ' ' << c.bbox.hi[0] << ' ' << c.bbox.hi[1]
       << ' ' << c.bbox.hi[2] << " label " << (c.positive() ? 1 : 0) << " pathway "
       << (c.pathway_id ? *c.pathway_id : -1) << '\n';
  }
  os << "end\n";
}

Study read_study(const fs::path& manifest_path) {
  auto is = open_in(manifest_path);
  std::string line;
  std::getline(is, line);
  if (line != "LNREL-STUDY 1") throw FormatError(manifest_path.string() + ": not a study manifest");
  const fs::path dir = manifest_path.parent_path();
  Study study;
  study.study_id = expect_value(is, "study_id", manifest_path);
  study.seed = std::stoull(expect_value(is, "seed", manifest_path));
  study.ct = read_volume(dir / expect_value(is, "ct", manifest_path));
  study.pet = read_volume(dir / expect_value(is, "pet", manifest_path));
  study.tumor_mask = read_mask(dir / expect_value(is, "tumor_mask", manifest_path));
  study.lung_mask = read_mask(dir / expect_value(is, "lung_mask", manifest_path));
  const std::size_t count = std::stoul(expect_value(is, "candidates", manifest_path));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw FormatError(manifest_path.string() + ": truncated candidate list");
    std::istringstream ls(line);
    std::string k_cand, k_center, k_bbox, k_label, k_path;
    std::size_t idx = 0;
    Candidate c;
    int label = 0, pathway = -1;
    ls >> k_cand >> idx >> k_center >> c.center[0] >> c.center[1] >> c.center[2] >> k_bbox >> c.bbox.lo[0] >>
        c.bbox.lo[1] >> c.bbox.lo[2] >> c.bbox.hi[0] >> c.bbox.hi[1] >> c.bbox.hi[2] >> k_label >> label >> k_path >>
        pathway;
    if (!ls || k_cand != "candidate" || idx != i || k_center != "center" || k_bbox != "bbox" || k_label != "label" ||
        k_path != "pathway" || (label != 0 && label != 1)) {
      throw FormatError(manifest_path.string() + ": malformed candidate line '" + line + "'");
    }
    c.label = label ? CandidateLabel::true_node : CandidateLabel::false_positive;
    if (pathway >= 0) c.pathway_id = pathway;
    study.candidates.push_back(c);
  }
  if (!std::getline(is, line) || line != "end") throw FormatError(manifest_path.string() + ": missing end marker");
  validate_study(study);
  return study;
}

std::string to_string(SplitPart part) {
  switch (part) {
    case SplitPart::train:
      return "train";
    case SplitPart::val:
      return "val";
    case SplitPart::test:
      return "test";
  }
  return "train";
}

SplitPart parse_split_part(const std::string& text) {
  if (text == "train") return SplitPart::train;
  if (text == "val") return SplitPart::val;
  if (text == "test") return SplitPart::test;
  throw FormatError("unknown split '" + text + "'");
}

void write_dataset_manifest(const fs::path& path, const DatasetManifest& manifest) {
  auto os = open_out(path);
  os << "LNREL-DATASET 1\n"
     << "split_seed = " << manifest.split_seed << '\n'
     << "studies = " << manifest.studies.size() << '\n';
  for (const DatasetEntry& e : manifest.studies) os << "study " << e.manifest << ' ' << to_string(e.split) << '\n';
  os << "end\n";
}

DatasetManifest read_dataset_manifest(const fs::path& path) {
  auto is = open_in(path);
  std::string line;
  std::getline(is, line);
  if (line != "LNREL-DATASET 1") throw FormatError(path.string() + ": not a dataset manifest");
  DatasetManifest manifest;
  manifest.split_seed = std::stoull(expect_value(is, "split_seed", path));
  const std::size_t count = std::stoul(expect_value(is, "studies", path));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw FormatError(path.string() + ": truncated study list");
    std::istringstream ls(line);
    std::string key, rel, part;
    if (!(ls >> key >> rel >> part) || key != "study") throw FormatError(path.string() + ": malformed line '" + line + "'");
    manifest.studies.push_back({rel, parse_split_part(part)});
  }
  if (!std::getline(is, line) || line != "end") throw FormatError(path.string() + ": missing end marker");
  return manifest;
}

}  // namespace lnrel
