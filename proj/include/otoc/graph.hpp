#pragma once

#include <functional>
#include <span>
#include <vector>

#include "otoc/scene.hpp"
#include "otoc/supervoxel.hpp"
#include "otoc/train_config.hpp"
#include "otoc/types.hpp"

namespace otoc {

/// Fully connected super-voxel graph with Gaussian-kernel edge weights.
struct SuperVoxelGraph {
  RowMatrix color;      // M x 3, standardized
  RowMatrix coord;      // M x 3, standardized
  RowMatrix unary;      // M x H, standardized (may have zero columns)
  RowMatrix embedding;  // M x D, unit rows (may have zero columns)
  RowMatrix weights;    // M x M, symmetric, zero diagonal

  std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }
};

/// exp(-sum_k lambda_k * d2_k / (2 sigma_k^2)) for the color, coordinate, unary-feature and
/// embedding squared distances.
double kernel_weight(double color_d2, double coord_d2, double unary_d2, double embed_d2, const PairwiseParams& pp);

/// Zero mean, unit variance per column; constant columns become zero.
RowMatrix standardize_columns(const RowMatrix& m);

/// Builds the graph from already pooled node features. Color, coordinate and unary features are
/// standardized here; embeddings are used as given. `keep_nearest` > 0 keeps only each node's
/// strongest edges (symmetrized); 0 keeps the dense graph.
SuperVoxelGraph graph_from_nodes(const RowMatrix& color, const RowMatrix& coord, const RowMatrix& unary,
                                 const RowMatrix& embedding, const PairwiseParams& pp, int keep_nearest = 0);

/// Pools per-point colors, coordinates and unary features over the partition, then builds the graph.
/// `embeddings` are per super-voxel (M x D) and may be empty.
SuperVoxelGraph build_graph(const SuperVoxelPartition& part, const Scene& scene, const RowMatrix& unary_features,
                            const RowMatrix& embeddings, const PairwiseParams& pp, int keep_nearest = 0);

/// Per-super-voxel categorical marginals.
struct MarginalField {
  RowMatrix q;  // M x C
};

using SweepObserver = std::function<void(int sweep, const RowMatrix& q)>;

/// Synchronous mean-field updates for the Potts energy, starting from the unary distribution.
MarginalField mean_field(const SuperVoxelGraph& graph, const RowMatrix& unary_probs, int iterations = 10,
                         const SweepObserver& observer = {});

/// Sum of -log(P_j(y_j) + 1e-12) plus w(j, j') over differently labeled pairs j < j'.
double energy(const SuperVoxelGraph& graph, const RowMatrix& unary_probs, std::span<const int> labeling);

struct MapLabel {
  int label = 0;
  double confidence = 0.0;
};

/// Argmax per row (lowest category wins ties) and its probability.
std::vector<MapLabel> map_labels(const MarginalField& field);

}  // namespace otoc
