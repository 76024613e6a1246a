#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spdnet/config.hpp"
#include "spdnet/nn.hpp"
#include "spdnet/tensor.hpp"

namespace spdnet {

/// Checkpoint binary layout: "SPDN" magic, one version byte, the config
/// snapshot as length-prefixed text, then a flat list of
/// (name, shape, little-endian f64 data) records. Round trips bit-exactly.
struct Checkpoint {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const std::vector<Parameter>& params);

Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into same-named parameters; throws on missing
/// names or shape mismatch.
void assign_parameters(std::vector<Parameter>& params, const Checkpoint& ckpt);

}  // namespace spdnet
