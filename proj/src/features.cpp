#include "otoc/features.hpp"

#include <cmath>
#include <vector>

#include "otoc/error.hpp"

namespace otoc {

LocalShape local_shape(std::span<const Eigen::Vector3d> neighborhood) {
  LocalShape shape;
  if (neighborhood.size() < 2) return shape;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : neighborhood) mean += p;
  mean /= static_cast<double>(neighborhood.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : neighborhood) {
    const Eigen::Vector3d d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(neighborhood.size());
  if (cov.trace() <= 1e-30) return shape;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Eigen returns ascending eigenvalues.
  const Eigen::Vector3d ev = solver.eigenvalues().cwiseMax(0.0);
  const double sum = ev.sum();
  if (!(sum > 0.0)) return shape;
  const double l1 = ev[2] / sum, l2 = ev[1] / sum, l3 = ev[0] / sum;

  Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
  if (n.z() < 0.0) n = -n;
  shape.normal = n;
  shape.linearity = (l1 - l2) / l1;
  shape.planarity = (l2 - l3) / l1;
  shape.scattering = l3 / l1;
  return shape;
}

FeatureMatrix extract_features(const Scene& scene, const KnnGraph& knn) {
  const std::size_t n = scene.size();
  if (knn.size() != n) throw ValidationError("knn graph built for a different scene");
  if (knn.k() < 3) throw ValidationError("k_neighbors must be at least 3");

  Eigen::Vector3d lo = scene.points[0], hi = scene.points[0];
  for (const auto& p : scene.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d ext = hi - lo;

  FeatureMatrix f(static_cast<Eigen::Index>(n), feature::kDim);
  std::vector<Eigen::Vector3d> hood;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto& p = scene.points[i];
    for (int a = 0; a < 3; ++a) f(row, feature::kXyz + a) = ext[a] > 0.0 ? (p[a] - lo[a]) / ext[a] : 0.0;
    for (int a = 0; a < 3; ++a) f(row, feature::kRgb + a) = scene.colors[i][a];

    hood.clear();
    hood.push_back(p);
    for (int j : knn.neighbors(i)) hood.push_back(scene.points[static_cast<std::size_t>(j)]);
    const LocalShape s = local_shape(hood);
    for (int a = 0; a < 3; ++a) f(row, feature::kNormal + a) = s.normal[a];
    f(row, feature::kHeight) = ext.z() > 0.0 ? (p.z() - lo.z()) / ext.z() : 0.0;
    f(row, feature::kLinearity) = s.linearity;
    f(row, feature::kPlanarity) = s.planarity;
    f(row, feature::kScattering) = s.scattering;
    f(row, feature::kVerticality) = std::abs(s.normal.z());
  }
  return f;
}

FeatureMatrix extract_features(const Scene& scene, int k_neighbors) {
  if (k_neighbors < 3) throw ValidationError("k_neighbors must be at least 3");
  if (scene.size() <= static_cast<std::size_t>(k_neighbors)) throw ValidationError("scene needs more than k points");
  return extract_features(scene, KnnGraph(scene.points, k_neighbors));
}

}  // namespace otoc
