#pragma once

#include <cstdint>
#include <vector>

#include "otoc/supervoxel.hpp"

namespace otoc {

/// How pseudo labels are propagated between self-training iterations.
enum class PropagationMode {
  kUnaryOnly,   // confidence of the classifier alone
  kGraph,       // mean-field over color, coordinate and unary-feature kernels
  kGraphRelation,  // mean-field over all four kernels, relation net combined into the unary
};

struct PairwiseParams {
  double lambda_c = 1.0, lambda_p = 1.0, lambda_u = 1.0, lambda_f = 1.0;
  double sigma_c = 1.0, sigma_p = 1.0, sigma_u = 1.0, sigma_f = 1.0;

  void validate() const;
};

struct TrainConfig {
  // Relation embedding width, confidence gate, per-category samples, temperature, key momentum.
  int embed_dim = 32;
  double confidence_threshold = 0.9;
  int samples_per_category = 20;
  double temperature = 0.07;
  double key_momentum = 0.9;
  PairwiseParams pairwise;
  int self_train_iterations = 5;

  double learning_rate = 1e-2;
  double sgd_momentum = 0.9;
  int epochs = 50;
  int batch_size = 64;
  /// Labeled points drawn (without replacement) per unary epoch; 0 means all.
  int max_points_per_epoch = 2048;
  std::vector<int> unary_hidden{64, 64};
  std::vector<int> relation_hidden{64};
  /// SGD steps of the relation network per self-training iteration.
  int relation_steps = 100;
  /// Member points drawn per sampled super-voxel when pooling embeddings in training; 0 means all.
  int relation_points_per_sv = 16;

  int mean_field_iterations = 10;
  /// Keep only each node's strongest edges when > 0; 0 keeps the dense graph.
  int graph_keep_nearest = 0;
  int k_neighbors = 10;
  PartitionParams partition;

  PropagationMode mode = PropagationMode::kGraphRelation;
  bool warm_start = false;
  /// Stop early once |coverage change| falls below this; 0 disables.
  double early_stop_delta = 0.0;

  int clicks_per_thing = 1;
  double thing_fraction = 1.0;

  void validate() const;
};

}  // namespace otoc
