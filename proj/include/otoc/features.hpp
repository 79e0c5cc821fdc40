#pragma once

#include "otoc/knn.hpp"
#include "otoc/scene.hpp"
#include "otoc/types.hpp"

namespace otoc {

/// Per-point feature layout produced by extract_features.
namespace feature {
inline constexpr int kXyz = 0;       // 3: position normalized to the bounding box, in [0, 1]
inline constexpr int kRgb = 3;       // 3
inline constexpr int kNormal = 6;    // 3: unit normal with z >= 0
inline constexpr int kHeight = 9;    // 1: (z - min z) / bbox height
inline constexpr int kLinearity = 10;
inline constexpr int kPlanarity = 11;
inline constexpr int kScattering = 12;
inline constexpr int kVerticality = 13;
inline constexpr int kDim = 14;
}  // namespace feature

/// N x 14 matrix of per-point descriptors.
using FeatureMatrix = RowMatrix;

/// Geometric descriptors of one neighbourhood.
struct LocalShape {
  Eigen::Vector3d normal{0.0, 0.0, 1.0};
  double linearity = 0.0;
  double planarity = 0.0;
  double scattering = 0.0;
};

/// PCA over the given points. Degenerate (zero) covariance yields the default LocalShape.
LocalShape local_shape(std::span<const Eigen::Vector3d> neighborhood);

FeatureMatrix extract_features(const Scene& scene, const KnnGraph& knn);
FeatureMatrix extract_features(const Scene& scene, int k_neighbors);

}  // namespace otoc
