#include "lnrel/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lnrel {

namespace {

constexpr const char* kMagic = "LNREL-CHECKPOINT";
constexpr int kVersion = 1;

void put_f64_le(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(bytes, 8);
}

double get_f64_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os << kMagic << ' ' << kVersion << '\n' << "count " << params.size() << '\n';
  std::size_t offset = 0;
  for (const auto& p : params) {
    const Shape& shape = p.param->value.shape();
    os << "param " << p.name << ' ' << shape.size();
    for (std::size_t d : shape) os << ' ' << d;
    os << ' ' << offset << '\n';
    offset += p.param->value.numel() * 8;
  }
  os << "end\n";
  for (const auto& p : params) {
    for (double v : p.param->value.data()) put_f64_le(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(is, line);
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kMagic || version != kVersion) {
      throw FormatError(path.string() + ": not a version-1 checkpoint");
    }
  }
  std::size_t count = 0;
  {
    std::getline(is, line);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> count) || key != "count") throw FormatError(path.string() + ": missing count line");
  }
  struct Header {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Header> headers;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw FormatError(path.string() + ": truncated manifest");
    std::istringstream ls(line);
    std::string key;
    Header h;
    std::size_t rank = 0;
    if (!(ls >> key >> h.name >> rank) || key != "param") {
      throw FormatError(path.string() + ": malformed manifest line '" + line + "'");
    }
    h.shape.resize(rank);
    for (auto& d : h.shape) ls >> d;
    if (!(ls >> h.offset)) throw FormatError(path.string() + ": malformed manifest line '" + line + "'");
    headers.push_back(std::move(h));
  }
  if (!std::getline(is, line) || line != "end") throw FormatError(path.string() + ": missing end marker");

  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Checkpoint ckpt;
  for (auto& h : headers) {
    const std::size_t n = shape_numel(h.shape);
    if (h.offset + n * 8 > payload.size()) throw FormatError(path.string() + ": payload too short for " + h.name);
    CheckpointEntry entry{h.name, h.shape, std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) entry.values[i] = get_f64_le(payload.data() + h.offset + 8 * i);
    ckpt.emplace(h.name, std::move(entry));
  }
  return ckpt;
}

std::size_t load_parameters(const Checkpoint& ckpt, const ParameterList& params,
                            const std::function<bool(const std::string&)>& filter) {
  std::size_t loaded = 0;
  for (const auto& p : params) {
    if (filter && !filter(p.name)) continue;
    auto it = ckpt.find(p.name);
    if (it == ckpt.end()) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    if (it->second.shape != p.param->value.shape()) {
      throw FormatError("checkpoint shape " + shape_str(it->second.shape) + " for '" + p.name +
                        "' does not match model shape " + shape_str(p.param->value.shape()));
    }
    auto dst = p.param->value.mutable_data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
    ++loaded;
  }
  return loaded;
}

}  // namespace lnrel
