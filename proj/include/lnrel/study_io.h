#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lnrel/checkpoint.h"
#include "lnrel/study.h"

namespace lnrel {

// Volume file: a text header followed by raw little-endian voxels, x fastest.
//
//   LNREL-VOLUME 1
//   shape <D> <H> <W>
//   spacing <sz> <sy> <sx>
//   type <f32|u8>
//   end
void write_volume(const std::filesystem::path& path, const Volume3D& volume);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
Volume3D read_volume(const std::filesystem::path& path);
BinaryMask read_mask(const std::filesystem::path& path);

// Writes ct.vol, pet.vol, tumor.vol, lung.vol and study.manifest into `dir`.
void write_study(const std::filesystem::path& dir, const Study& study);
// Reads a study.manifest and the volumes it names (paths relative to it).
Study read_study(const std::filesystem::path& manifest_path);

enum class SplitPart { train, val, test };
std::string to_string(SplitPart part);
SplitPart parse_split_part(const std::string& text);

struct DatasetEntry {
  std::string manifest;  // relative to the dataset manifest
  SplitPart split = SplitPart::train;
  bool operator==(const DatasetEntry&) const = default;
};

struct DatasetManifest {
  std::uint64_t split_seed = 0;
  std::vector<DatasetEntry> studies;
  bool operator==(const DatasetManifest&) const = default;
};

void write_dataset_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_dataset_manifest(const std::filesystem::path& path);

}  // namespace lnrel
