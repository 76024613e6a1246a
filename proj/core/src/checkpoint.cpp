#include "spdnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spdnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'P', 'D', 'N'};
constexpr std::uint8_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const std::vector<Parameter>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));

  const std::string snapshot = config.to_text();
  write_u32(out, static_cast<std::uint32_t>(snapshot.size()));
  out.write(snapshot.data(), static_cast<std::streamsize>(snapshot.size()));

  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.value.shape();
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) write_u64(out, static_cast<std::uint64_t>(e));
    const auto& values = p.value.values();
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const int version = in.get();
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const std::uint32_t snap_len = read_u32(in);
  std::string snapshot(snap_len, '\0');
  in.read(snapshot.data(), snap_len);
  if (!in) throw std::runtime_error("checkpoint: truncated config snapshot");
  ckpt.config = ModelConfig::from_text(snapshot);

  const std::uint32_t count = read_u32(in);
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = read_u32(in);
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(read_u64(in));
      numel *= shape[d];
    }
    std::vector<double> values(numel);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return ckpt;
}

void assign_parameters(std::vector<Parameter>& params, const Checkpoint& ckpt) {
  for (Parameter& p : params) {
    const Tensor* found = nullptr;
    for (const auto& [name, tensor] : ckpt.tensors) {
      if (name == p.name) {
        found = &tensor;
        break;
      }
    }
    if (!found) throw std::runtime_error("checkpoint: missing parameter '" + p.name + "'");
    if (found->shape() != p.value.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + p.name + "', " +
                               shape_string(found->shape()) + " vs " + shape_string(p.value.shape()));
    }
    p.value.values() = found->values();
  }
}

}  // namespace spdnet
