#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "otoc/features.hpp"
#include "otoc/knn.hpp"
#include "otoc/scene.hpp"
#include "otoc/types.hpp"

namespace otoc {

/// Disjoint cover of the scene's points by super-voxels with contiguous ids 0..M-1.
class SuperVoxelPartition {
 public:
  SuperVoxelPartition() = default;
  /// Takes ids that are already contiguous; throws ValidationError otherwise.
  explicit SuperVoxelPartition(std::vector<int> assignment);

  /// Renumbers arbitrary ids to 0..M-1 in order of first appearance.
  static SuperVoxelPartition compacted(std::span<const std::uint32_t> raw_ids);

  std::size_t num_points() const { return assignment_.size(); }
  std::size_t num_supervoxels() const { return members_.size(); }
  int id_of(std::size_t point) const { return assignment_[point]; }
  const std::vector<int>& assignment() const { return assignment_; }
  const std::vector<int>& members(std::size_t sv) const { return members_[sv]; }

 private:
  std::vector<int> assignment_;
  std::vector<std::vector<int>> members_;
};

struct PartitionParams {
  int k_neighbors = 10;
  double normal_angle_max = 0.35;  // radians
  double color_dist_max = 0.25;
  int min_size = 10;
  int max_size = 5000;

  void validate() const;
};

/// BFS region growing over the k-NN graph (seeds in ascending point order), followed by
/// merging undersized regions into the adjacent region with the nearest mean color.
SuperVoxelPartition partition_region_growing(const Scene& scene, const FeatureMatrix& features,
                                             const PartitionParams& params);
SuperVoxelPartition partition_region_growing(const Scene& scene, const FeatureMatrix& features,
                                             const KnnGraph& knn, const PartitionParams& params);

/// OTSP file: "OTSP", u32 version=1, u32 N, N x u32 ids.
SuperVoxelPartition load_partition(const std::filesystem::path& path, const Scene& scene);
SuperVoxelPartition load_partition(const std::filesystem::path& path, std::size_t num_points);
void save_partition(const SuperVoxelPartition& part, const std::filesystem::path& path);

/// Row j = mean of member rows. Input rows must sum to 1 within 1e-6.
RowMatrix pool_distribution(const RowMatrix& per_point, const SuperVoxelPartition& part);

/// Row j = mean of member rows.
RowMatrix pool_vectors(const RowMatrix& per_point, const SuperVoxelPartition& part);

}  // namespace otoc
