#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "otoc/scene.hpp"
#include "otoc/supervoxel.hpp"

namespace otoc {

struct Click {
  int point = 0;
  std::int32_t category = 0;
  bool operator==(const Click&) const = default;
};

struct ClickSet {
  std::vector<Click> clicks;
  std::uint64_t rng_seed = 0;
  int clicks_per_thing = 1;
  double thing_fraction = 1.0;
};

enum class Provenance : std::uint8_t { kAbsent = 0, kSeed = 1, kPropagated = 2 };

struct PseudoLabel {
  Label label;
  float confidence = 0.0f;
  Provenance provenance = Provenance::kAbsent;
  bool operator==(const PseudoLabel&) const = default;
};

/// One entry per super-voxel.
struct PseudoLabels {
  std::vector<PseudoLabel> entries;
  /// Super-voxels dropped because clicks of different categories landed in them.
  int conflicts = 0;

  std::size_t size() const { return entries.size(); }
  /// Fraction of super-voxels that carry a label.
  double coverage() const;
  void validate() const;
};

/// Simulates one-thing-one-click annotation: picks ceil(thing_fraction * #instances)
/// instances uniformly without replacement, then clicks_per_thing distinct points in each.
ClickSet simulate_clicks(const Scene& scene, std::uint64_t seed, int clicks_per_thing = 1,
                         double thing_fraction = 1.0);

/// Spreads each click to its super-voxel. Mixed-category super-voxels become ABSENT.
PseudoLabels expand_clicks(const ClickSet& clicks, const SuperVoxelPartition& part);

/// OTPL file: "OTPL", u32 version=1, u32 M, M x (i32 label, f32 confidence, u8 provenance).
PseudoLabels load_pseudo_labels(const std::filesystem::path& path);
void save_pseudo_labels(const PseudoLabels& labels, const std::filesystem::path& path);

}  // namespace otoc
