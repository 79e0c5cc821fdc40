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

/// Per-point training targets for one scene (std::nullopt = not supervised).
struct LabeledScene {
  const FeatureMatrix* features = nullptr;
  std::vector<Label> labels;
};

/// Each point inherits the pseudo label of its super-voxel.
std::vector<Label> point_labels(const PseudoLabels& labels, const SuperVoxelPartition& part);

/// Mean softmax cross-entropy over the rows of `inputs` and its gradient w.r.t. the parameters.
struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};
LossGradient cross_entropy_loss(const Mlp& model, const RowMatrix& inputs, std::span<const int> targets);

struct UnaryResult {
  Mlp model;
  double final_loss = 0.0;      // mean loss over the last epoch
  double final_accuracy = 0.0;  // training accuracy over the last epoch
};

/// Trains the classifier on every supervised point of every scene.
/// `init` (optional) warm-starts from existing parameters.
UnaryResult train_unary(std::span<const LabeledScene> scenes, int num_categories, const TrainConfig& cfg,
                        std::uint64_t seed, const Mlp* init = nullptr);

UnaryResult train_unary(const FeatureMatrix& features, const PseudoLabels& labels, const SuperVoxelPartition& part,
                        int num_categories, const TrainConfig& cfg, std::uint64_t seed);

struct UnaryPrediction {
  RowMatrix probs;        // N x C
  RowMatrix penultimate;  // N x H
};

UnaryPrediction predict_unary(const Mlp& model, const FeatureMatrix& features);

}  // namespace otoc
