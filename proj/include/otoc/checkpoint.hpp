#pragma once

#include <filesystem>
#include <optional>

#include "otoc/mlp.hpp"
#include "otoc/relation.hpp"

namespace otoc {

struct Checkpoint {
  Mlp model;
  std::optional<MemoryBank> bank;
};

/// OTNN file: "OTNN", u32 version=1, u32 L, L x u32 layer sizes, row-major f64 weights and
/// biases per layer, then u32 C, u32 D, C x D f64 keys, f64 tau, f64 m (C = D = 0 without a bank).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace otoc
