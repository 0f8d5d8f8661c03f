#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lnrel/nn.h"

namespace lnrel {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter checkpoint file:
//
//   LNREL-CHECKPOINT 1
//   count <n>
//   param <name> <rank> <d0> ... <d{rank-1}> <byte_offset>
//   ...
//   end
//   <raw little-endian float64 payload>
//
// byte_offset counts from the first payload byte; entries are stored in
// manifest order with no padding.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

using Checkpoint = std::map<std::string, CheckpointEntry>;

void write_checkpoint(const std::filesystem::path& path, const ParameterList& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies matching entries into params. Every parameter accepted by `filter`
// must be present with an identical shape. Returns the number loaded.
std::size_t load_parameters(const Checkpoint& ckpt, const ParameterList& params,
                            const std::function<bool(const std::string&)>& filter = {});

}  // namespace lnrel
