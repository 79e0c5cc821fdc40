#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "otoc/types.hpp"

namespace otoc {

struct Metrics {
  /// Per-category IoU; std::nullopt when the category is absent from both prediction and gt.
  std::vector<std::optional<double>> iou;
  double miou = 0.0;
};

/// Accumulates per-point (prediction, gt) pairs; gt UNLABELED points are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_categories);

  void add(std::span<const Label> pred, std::span<const Label> gt);
  std::uint64_t count(int gt, int pred) const;
  Metrics metrics() const;

 private:
  int c_;
  std::vector<std::uint64_t> counts_;      // gt-major C x C
  std::vector<std::uint64_t> unpredicted_;  // labeled gt points without a prediction
};

Metrics miou(std::span<const Label> pred, std::span<const Label> gt, int num_categories);

}  // namespace otoc
