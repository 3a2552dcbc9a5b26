#include "hcctc/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace hcctc {
namespace {

constexpr char kMagic[4] = {'H', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("truncated checkpoint: " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint: " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t element_count(const Shape& shape) {
  std::uint64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u64(os, ckpt.size());
  for (const auto& e : ckpt) {
    if (element_count(e.shape) != e.data.size())
      throw CheckpointError("entry " + e.name + " has " + std::to_string(e.data.size()) + " values for shape " +
                            shape_string(e.shape));
    put_u64(os, e.name.size());
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u64(os, e.shape.size());
    for (auto extent : e.shape) put_u64(os, extent);
    for (float f : e.data) put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
  if (!os) throw CheckpointError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic: " + path);
  const std::uint32_t version = get_u32(is, path);
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t count = get_u64(is, path);
  Checkpoint ckpt;
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    const std::uint64_t name_len = get_u64(is, path);
    if (name_len > (1u << 20)) throw CheckpointError("implausible name length in " + path);
    e.name.resize(name_len);
    if (!is.read(e.name.data(), static_cast<std::streamsize>(name_len))) throw CheckpointError("truncated checkpoint: " + path);
    const std::uint64_t rank = get_u64(is, path);
    if (rank > 8) throw CheckpointError("implausible rank for " + e.name);
    for (std::uint64_t r = 0; r < rank; ++r) e.shape.push_back(get_u64(is, path));
    const std::uint64_t n = element_count(e.shape);
    e.data.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) e.data[i] = std::bit_cast<float>(get_u32(is, path));
    ckpt.push_back(std::move(e));
  }
  return ckpt;
}

Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts) {
  if (ckpts.empty()) throw CheckpointError("no checkpoints to average");
  const Checkpoint& first = ckpts.front();
  for (std::size_t c = 1; c < ckpts.size(); ++c) {
    if (ckpts[c].size() != first.size())
      throw CheckpointError("checkpoint " + std::to_string(c) + " has a different entry count");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (ckpts[c][i].name != first[i].name)
        throw CheckpointError("entry name mismatch: " + first[i].name + " vs " + ckpts[c][i].name);
      if (ckpts[c][i].shape != first[i].shape)
        throw CheckpointError("shape mismatch for " + first[i].name);
    }
  }
  Checkpoint out = first;
  const double n = static_cast<double>(ckpts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < out[i].data.size(); ++j) {
      double acc = 0.0;
      for (const auto& c : ckpts) acc += static_cast<double>(c[i].data[j]);
      out[i].data[j] = static_cast<float>(acc / n);
    }
  }
  return out;
}

}  // namespace hcctc
