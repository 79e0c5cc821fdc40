#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "otoc/annotate.hpp"
#include "otoc/features.hpp"
#include "otoc/mlp.hpp"
#include "otoc/supervoxel.hpp"
#include "otoc/train_config.hpp"

namespace otoc {

/// Per-category prototype keys (unit-norm rows) updated by momentum averaging.
struct MemoryBank {
  RowMatrix keys;  // C x D
  double temperature = 0.07;
  double momentum = 0.9;

  /// Keys drawn i.i.d. standard normal, then normalized.
  static MemoryBank random(int num_categories, int dim, double temperature, double momentum, CounterRng& rng);

  int num_categories() const { return static_cast<int>(keys.rows()); }
  int dim() const { return static_cast<int>(keys.cols()); }

  /// k_c <- normalize(m * k_c + (1 - m) * f).
  void update(int category, const Eigen::VectorXd& embedding);
  void validate() const;
};

/// -log softmax_c(f . k_c / tau)[category] for a single embedding.
double contrastive_loss(const Eigen::VectorXd& embedding, const MemoryBank& bank, int category);

/// Row j = softmax_c(f_j . k_c / tau).
RowMatrix relation_probs(const RowMatrix& embeddings, const MemoryBank& bank);

/// Elementwise product of two row-stochastic matrices, renormalized per row.
/// Rows whose product mass is below 1e-12 fall back to the unary row.
RowMatrix combine_probs(const RowMatrix& unary, const RowMatrix& relation);

/// L2-normalized mean of the per-point relation outputs over each super-voxel.
RowMatrix embed_supervoxels(const Mlp& relation, const FeatureMatrix& features, const SuperVoxelPartition& part);

/// One pooled training sample: the member rows of a super-voxel and its category.
struct RelationSample {
  const FeatureMatrix* features = nullptr;
  std::vector<int> points;
  int category = 0;
};

struct RelationLoss {
  double loss = 0.0;
  Eigen::VectorXd gradient;
  RowMatrix embeddings;  // one unit-norm row per sample
};

/// Mean contrastive loss over the samples with the keys held fixed.
RelationLoss relation_loss(const Mlp& relation, const MemoryBank& bank, std::span<const RelationSample> samples);

/// A labeled super-voxel available for relation training.
struct LabeledSuperVoxel {
  const FeatureMatrix* features = nullptr;
  const SuperVoxelPartition* partition = nullptr;
  int supervoxel = 0;
  int category = 0;
};

struct RelationResult {
  Mlp model;
  MemoryBank bank;
  double final_loss = 0.0;  // mean loss over the last tenth of the steps
  bool degenerate = false;  // fewer than two categories were available
};

/// Balanced sampling of s super-voxels per present category each step, InfoNCE loss against
/// the memory bank, then momentum update of the sampled categories' keys.
RelationResult train_relation(std::span<const LabeledSuperVoxel> labeled, MemoryBank bank, int feature_dim,
                              const TrainConfig& cfg, std::uint64_t seed, const Mlp* init = nullptr);

RelationResult train_relation(const FeatureMatrix& features, const PseudoLabels& labels,
                              const SuperVoxelPartition& part, MemoryBank bank, const TrainConfig& cfg,
                              std::uint64_t seed);

}  // namespace otoc
