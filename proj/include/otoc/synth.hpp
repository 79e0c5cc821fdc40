#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "otoc/scene.hpp"

namespace otoc {

namespace category {
inline constexpr int kFloor = 0;
inline constexpr int kWall = 1;
inline constexpr int kTable = 2;
inline constexpr int kChair = 3;
inline constexpr int kCabinet = 4;
inline constexpr int kClutter = 5;
inline constexpr int kCount = 6;
}  // namespace category

struct IntRange {
  int min = 0;
  int max = 0;
};

/// Parameters of the procedural room generator. Object counts are inclusive ranges per category.
struct SynthSpec {
  std::uint64_t seed = 0;
  int num_categories = category::kCount;
  std::array<IntRange, category::kCount> objects{{{1, 1}, {2, 4}, {1, 3}, {2, 5}, {1, 3}, {1, 4}}};
  double point_density = 150.0;  // points per square meter of surface
  IntRange points_per_object{80, 6000};
  std::array<Eigen::Vector3d, category::kCount> color_mean{{
      {0.60, 0.50, 0.40},  // floor
      {0.70, 0.68, 0.62},  // wall
      {0.55, 0.40, 0.30},  // table
      {0.45, 0.42, 0.50},  // chair
      {0.62, 0.55, 0.45},  // cabinet
      {0.40, 0.55, 0.55},  // clutter
  }};
  double color_instance_noise = 0.06;  // per-instance offset sigma
  double color_noise = 0.04;           // per-point sigma
  double coord_noise = 0.004;          // meters
  double room_extent_min = 4.0;
  double room_extent_max = 6.0;
  double wall_height = 2.5;

  void validate() const;
};

/// Samples a room: floor, walls on up to four sides, box-shaped tables/chairs/cabinets and
/// spherical clutter. Each primitive is one instance; instance ids are dense from 0.
Scene generate_scene(const SynthSpec& spec);

/// Writes `count` scenes generated with seeds spec.seed + 0 .. count-1 as scene_NNNN.otoc.
std::vector<std::filesystem::path> generate_corpus(const SynthSpec& spec, int count,
                                                   const std::filesystem::path& out_dir);

}  // namespace otoc
