#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace otoc {

/// Exact k-nearest-neighbour lists over a point set, accelerated by a uniform grid.
/// Each list excludes the query point and is ordered by (distance, index).
class KnnGraph {
 public:
  KnnGraph(std::span<const Eigen::Vector3d> points, int k);

  int k() const { return k_; }
  std::size_t size() const { return n_; }
  std::span<const int> neighbors(std::size_t i) const {
    return {indices_.data() + i * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
  }

 private:
  int k_;
  std::size_t n_;
  std::vector<int> indices_;
};

}  // namespace otoc
