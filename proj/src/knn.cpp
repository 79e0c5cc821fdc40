#include "otoc/knn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "otoc/error.hpp"

namespace otoc {

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& c) const {
    std::uint64_t h = static_cast<std::uint64_t>(c.x) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(c.y) * 0xc2b2ae3d27d4eb4fULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(c.z) * 0x165667b19e3779f9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

KnnGraph::KnnGraph(std::span<const Eigen::Vector3d> points, int k) : k_(k), n_(points.size()) {
  if (k < 1) throw ValidationError("k must be positive");
  if (n_ <= static_cast<std::size_t>(k)) throw ValidationError("need more points than neighbours");

  Eigen::Vector3d lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Points mostly lie on surfaces, so size cells from an area estimate.
  const Eigen::Vector3d ext = (hi - lo).cwiseMax(1e-9);
  const double area = ext.x() * ext.y() + ext.y() * ext.z() + ext.x() * ext.z();
  double cell = std::sqrt(area * 2.0 * k / static_cast<double>(n_));
  if (!(cell > 0.0) || !std::isfinite(cell)) cell = 1.0;

  auto key_of = [&](const Eigen::Vector3d& p) {
    return CellKey{static_cast<std::int64_t>(std::floor((p.x() - lo.x()) / cell)),
                   static_cast<std::int64_t>(std::floor((p.y() - lo.y()) / cell)),
                   static_cast<std::int64_t>(std::floor((p.z() - lo.z()) / cell))};
  };
  std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
  for (std::size_t i = 0; i < n_; ++i) grid[key_of(points[i])].push_back(static_cast<int>(i));
  const CellKey max_key = key_of(hi);
  const std::int64_t max_ring = std::max({max_key.x, max_key.y, max_key.z}) + 1;

  indices_.resize(n_ * static_cast<std::size_t>(k));
  std::vector<std::pair<double, int>> cand;
  for (std::size_t i = 0; i < n_; ++i) {
    const CellKey c = key_of(points[i]);
    cand.clear();
    for (std::int64_t r = 0; r <= max_ring; ++r) {
      for (std::int64_t dx = -r; dx <= r; ++dx)
        for (std::int64_t dy = -r; dy <= r; ++dy)
          for (std::int64_t dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            auto it = grid.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
            if (it == grid.end()) continue;
            for (int j : it->second) {
              if (j == static_cast<int>(i)) continue;
              cand.emplace_back((points[j] - points[i]).squaredNorm(), j);
            }
          }
      // Anything outside ring r is at least r * cell away.
      if (cand.size() >= static_cast<std::size_t>(k)) {
        std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
        const double kth = cand[static_cast<std::size_t>(k - 1)].first;
        const double bound = static_cast<double>(r) * cell;
        if (kth < bound * bound) break;
      }
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int a = 0; a < k; ++a) indices_[i * static_cast<std::size_t>(k) + a] = cand[a].second;
  }
}

}  // namespace otoc
