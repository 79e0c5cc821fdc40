#include "otoc/supervoxel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "binio.hpp"
#include "otoc/error.hpp"

namespace otoc {

SuperVoxelPartition::SuperVoxelPartition(std::vector<int> assignment) : assignment_(std::move(assignment)) {
  if (assignment_.empty()) throw ValidationError("partition of an empty point set");
  int max_id = -1;
  for (int id : assignment_) {
    if (id < 0) throw ValidationError("negative super-voxel id");
    max_id = std::max(max_id, id);
  }
  members_.resize(static_cast<std::size_t>(max_id) + 1);
  for (std::size_t i = 0; i < assignment_.size(); ++i)
    members_[static_cast<std::size_t>(assignment_[i])].push_back(static_cast<int>(i));
  for (const auto& m : members_)
    if (m.empty()) throw ValidationError("super-voxel ids are not contiguous");
}

SuperVoxelPartition SuperVoxelPartition::compacted(std::span<const std::uint32_t> raw_ids) {
  std::unordered_map<std::uint32_t, int> remap;
  std::vector<int> ids;
  ids.reserve(raw_ids.size());
  for (auto raw : raw_ids) {
    auto [it, inserted] = remap.try_emplace(raw, static_cast<int>(remap.size()));
    ids.push_back(it->second);
  }
  return SuperVoxelPartition(std::move(ids));
}

void PartitionParams::validate() const {
  if (k_neighbors < 3) throw ValidationError("k_neighbors must be at least 3");
  if (!(normal_angle_max > 0.0 && normal_angle_max < std::numbers::pi / 2))
    throw ValidationError("normal_angle_max must lie in (0, pi/2)");
  if (!(color_dist_max >= 0.0 && color_dist_max <= std::sqrt(3.0) + 1e-12))
    throw ValidationError("color_dist_max must lie in [0, sqrt(3)]");
  if (min_size < 1 || max_size < 1 || min_size > max_size)
    throw ValidationError("need 1 <= min_size <= max_size");
}

SuperVoxelPartition partition_region_growing(const Scene& scene, const FeatureMatrix& features,
                                             const PartitionParams& params) {
  params.validate();
  return partition_region_growing(scene, features, KnnGraph(scene.points, params.k_neighbors), params);
}

SuperVoxelPartition partition_region_growing(const Scene& scene, const FeatureMatrix& features,
                                             const KnnGraph& knn, const PartitionParams& params) {
  params.validate();
  const std::size_t n = scene.size();
  if (static_cast<std::size_t>(features.rows()) != n || features.cols() != feature::kDim)
    throw ValidationError("features do not match the scene");
  if (knn.size() != n) throw ValidationError("knn graph built for a different scene");

  auto normal_of = [&](std::size_t i) {
    return Eigen::Vector3d(features.row(static_cast<Eigen::Index>(i)).segment<3>(feature::kNormal));
  };
  // Normals are unoriented (z >= 0 is only a convention), so compare lines, not vectors.
  const double cos_min = std::cos(params.normal_angle_max);

  constexpr int kUnassigned = -1;
  std::vector<int> region(n, kUnassigned);
  std::vector<Eigen::Vector3d> color_sum;
  std::vector<int> sizes;
  std::deque<int> frontier;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (region[seed] != kUnassigned) continue;
    const int id = static_cast<int>(sizes.size());
    region[seed] = id;
    Eigen::Vector3d normal_sum = normal_of(seed);
    Eigen::Vector3d csum = scene.colors[seed];
    int size = 1;
    frontier.assign({static_cast<int>(seed)});
    while (!frontier.empty() && size < params.max_size) {
      const int cur = frontier.front();
      frontier.pop_front();
      for (int nb : knn.neighbors(static_cast<std::size_t>(cur))) {
        if (size >= params.max_size) break;
        const auto u = static_cast<std::size_t>(nb);
        if (region[u] != kUnassigned) continue;
        const Eigen::Vector3d mean_normal = normal_sum.normalized();
        Eigen::Vector3d nn = normal_of(u);
        const double c = nn.dot(mean_normal);
        if (std::abs(c) < cos_min) continue;
        if ((scene.colors[u] - csum / size).norm() > params.color_dist_max) continue;
        region[u] = id;
        normal_sum += c < 0.0 ? Eigen::Vector3d(-nn) : nn;
        csum += scene.colors[u];
        ++size;
        frontier.push_back(nb);
      }
    }
    color_sum.push_back(csum);
    sizes.push_back(size);
  }

  // Undersized regions merge into the adjacent region with the nearest mean color.
  const std::size_t num_regions = sizes.size();
  std::vector<int> parent(num_regions);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int r) {
    while (parent[static_cast<std::size_t>(r)] != r) {
      parent[static_cast<std::size_t>(r)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(r)])];
      r = parent[static_cast<std::size_t>(r)];
    }
    return r;
  };
  std::vector<std::vector<int>> region_points(num_regions);
  for (std::size_t i = 0; i < n; ++i) region_points[static_cast<std::size_t>(region[i])].push_back(static_cast<int>(i));

  // Repeat passes until stable: an absorbing region may itself still be undersized.
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t r = 0; r < num_regions; ++r) {
      if (find(static_cast<int>(r)) != static_cast<int>(r) || sizes[r] >= params.min_size) continue;
      std::vector<int> adjacent;
      for (int p : region_points[r])
        for (int nb : knn.neighbors(static_cast<std::size_t>(p))) {
          const int other = find(region[static_cast<std::size_t>(nb)]);
          if (other != static_cast<int>(r)) adjacent.push_back(other);
        }
      if (adjacent.empty()) continue;
      std::sort(adjacent.begin(), adjacent.end());
      adjacent.erase(std::unique(adjacent.begin(), adjacent.end()), adjacent.end());
      const Eigen::Vector3d mine = color_sum[r] / sizes[r];
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int a : adjacent) {
        const auto ua = static_cast<std::size_t>(a);
        const double d = (color_sum[ua] / sizes[ua] - mine).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = a;
        }
      }
      const auto ub = static_cast<std::size_t>(best);
      parent[r] = best;
      color_sum[ub] += color_sum[r];
      sizes[ub] += sizes[r];
      region_points[ub].insert(region_points[ub].end(), region_points[r].begin(), region_points[r].end());
      region_points[r].clear();
      merged = true;
    }
  }

  std::vector<std::uint32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(find(region[i]));
  return SuperVoxelPartition::compacted(ids);
}

namespace {
constexpr std::uint32_t kPartitionVersion = 1;
}

SuperVoxelPartition load_partition(const std::filesystem::path& path, std::size_t num_points) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes);
  r.expect_magic("OTSP");
  r.expect_version(kPartitionVersion);
  const std::uint32_t n = r.u32();
  if (n != num_points)
    throw ValidationError("partition has " + std::to_string(n) + " ids but the scene has " +
                          std::to_string(num_points) + " points");
  if (r.remaining() != static_cast<std::size_t>(n) * 4)
    throw ValidationError("partition payload length does not match its point count");
  std::vector<std::uint32_t> raw(n);
  for (auto& id : raw) id = r.u32();
  return SuperVoxelPartition::compacted(raw);
}

SuperVoxelPartition load_partition(const std::filesystem::path& path, const Scene& scene) {
  return load_partition(path, scene.size());
}

void save_partition(const SuperVoxelPartition& part, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic("OTSP");
  w.u32(kPartitionVersion);
  w.u32(static_cast<std::uint32_t>(part.num_points()));
  for (int id : part.assignment()) w.u32(static_cast<std::uint32_t>(id));
  detail::write_file(path, w.bytes());
}

RowMatrix pool_vectors(const RowMatrix& per_point, const SuperVoxelPartition& part) {
  if (static_cast<std::size_t>(per_point.rows()) != part.num_points())
    throw ValidationError("row count does not match the partition");
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(part.num_supervoxels()), per_point.cols());
  for (std::size_t j = 0; j < part.num_supervoxels(); ++j) {
    const auto& m = part.members(j);
    auto row = out.row(static_cast<Eigen::Index>(j));
    for (int i : m) row += per_point.row(i);
    row /= static_cast<double>(m.size());
  }
  return out;
}

RowMatrix pool_distribution(const RowMatrix& per_point, const SuperVoxelPartition& part) {
  for (Eigen::Index i = 0; i < per_point.rows(); ++i) {
    const double s = per_point.row(i).sum();
    if (std::abs(s - 1.0) > 1e-6 || (per_point.row(i).array() < 0.0).any())
      throw ValidationError("row " + std::to_string(i) + " is not a probability distribution");
  }
  return pool_vectors(per_point, part);
}

}  // namespace otoc
