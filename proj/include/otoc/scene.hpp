#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "otoc/types.hpp"

namespace otoc {

/// A labeled point cloud. Colors are RGB in [0, 1]; labels use std::nullopt for UNLABELED.
struct Scene {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;
  std::vector<Label> gt_semantic;
  std::vector<Label> gt_instance;
  int num_categories = 0;

  std::size_t size() const { return points.size(); }

  /// Throws ValidationError if any invariant is broken (equal lengths, N >= 1,
  /// finite coordinates, labels in range, instances only on labeled points).
  void validate() const;
};

/// Reads an OTOC scene file ("OTOC", u32 version=1, u32 N, u32 C, N x 23-byte records).
Scene load_scene(const std::filesystem::path& path);

void save_scene(const Scene& scene, const std::filesystem::path& path);

/// Byte-level codec used by the file functions.
std::vector<std::uint8_t> encode_scene(const Scene& scene);
Scene decode_scene(const std::vector<std::uint8_t>& bytes);

}  // namespace otoc
