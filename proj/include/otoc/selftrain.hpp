#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otoc/annotate.hpp"
#include "otoc/features.hpp"
#include "otoc/graph.hpp"
#include "otoc/metrics.hpp"
#include "otoc/mlp.hpp"
#include "otoc/relation.hpp"
#include "otoc/scene.hpp"
#include "otoc/supervoxel.hpp"
#include "otoc/train_config.hpp"

namespace otoc {

/// A scene with its features and super-voxel partition computed once.
struct PreparedScene {
  Scene scene;
  FeatureMatrix features;
  SuperVoxelPartition partition;
};

PreparedScene prepare_scene(Scene scene, const TrainConfig& cfg);
PreparedScene prepare_scene(Scene scene, SuperVoxelPartition partition, const TrainConfig& cfg);

struct IterationMetrics {
  int iteration = 0;
  double coverage = 0.0;
  double train_loss_unary = 0.0;
  std::optional<double> train_loss_relation;
  std::optional<double> miou;
};

/// Trained networks used to label a scene.
struct Models {
  Mlp unary;
  std::optional<Mlp> relation;
  std::optional<MemoryBank> bank;
};

struct SelfTrainState {
  int iteration = 0;
  std::vector<PseudoLabels> seeds;   // expansion of the clicks, per training scene
  std::vector<PseudoLabels> labels;  // current pseudo labels, per training scene
  std::optional<Models> models;
  std::vector<IterationMetrics> log;

  /// Labeled fraction over all super-voxels of all training scenes.
  double coverage() const;
};

/// Simulates clicks on every training scene and spreads them to super-voxels.
SelfTrainState initial_state(std::span<const PreparedScene> train, const TrainConfig& cfg, std::uint64_t seed);

/// Marginals for one scene under the configured propagation mode.
RowMatrix propagate(const PreparedScene& ps, const Models& models, const TrainConfig& cfg,
                    const SweepObserver& observer = {});

/// Seeds are kept; other super-voxels take argmax Q when its probability reaches the threshold.
PseudoLabels update_pseudo_labels(const RowMatrix& q, double threshold, const PseudoLabels& seeds);

/// Per-point predictions. With `no_propagation` only the classifier is used, point by point.
std::vector<Label> infer(const PreparedScene& ps, const Models& models, const TrainConfig& cfg, bool no_propagation,
                         const SweepObserver& observer = {});

/// Suite-level mIoU over scenes that carry ground truth; std::nullopt if none do.
std::optional<double> evaluate(std::span<const PreparedScene> scenes, const Models& models, const TrainConfig& cfg,
                               bool no_propagation = false);

/// Train both networks on the current labels, propagate, and replace the pseudo labels.
SelfTrainState run_iteration(SelfTrainState state, std::span<const PreparedScene> train, const TrainConfig& cfg,
                             std::uint64_t seed, std::span<const PreparedScene> eval = {});

struct RunReport {
  Models models;
  SelfTrainState state;
  std::vector<IterationMetrics> iterations;
  std::optional<double> final_miou;
};

/// Clicks, expansion, then self_train_iterations rounds of run_iteration.
RunReport run(const TrainConfig& cfg, std::span<const PreparedScene> train, std::span<const PreparedScene> eval,
              std::uint64_t seed);

/// Reference run on complete ground truth: points keep their own labels, super-voxels take the
/// majority label. One training round, no propagation.
RunReport run_fully_supervised(const TrainConfig& cfg, std::span<const PreparedScene> train,
                               std::span<const PreparedScene> eval, std::uint64_t seed);

/// CSV with header iteration,coverage,train_loss_unary,train_loss_relation,miou.
std::string report_csv(std::span<const IterationMetrics> rows);

}  // namespace otoc
