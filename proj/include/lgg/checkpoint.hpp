#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lgg/model.hpp"

namespace lgg {

std::uint64_t fnv1a64(const std::string& text);

// Versioned little-endian container: magic, version, config digest, montage
// digest, then named tensors (name length, name, rank, extents, raw f64).
struct Checkpoint {
  std::uint64_t config_digest = 0;
  std::uint64_t montage_digest = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::string& path, ModelParams& params, std::uint64_t config_digest,
                     std::uint64_t montage_digest);

Checkpoint read_checkpoint(const std::string& path);

// Copies checkpoint tensors into `params` by name; shapes must match and
// every parameter must be present.
void apply_checkpoint(const Checkpoint& ckpt, ModelParams& params);

std::uint64_t config_digest(const ModelConfig& config);
std::uint64_t montage_digest(const MontageGraph& montage);

}  // namespace lgg
