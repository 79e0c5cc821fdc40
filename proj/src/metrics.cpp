#include "otoc/metrics.hpp"

#include "otoc/error.hpp"

namespace otoc {

ConfusionMatrix::ConfusionMatrix(int num_categories)
    : c_(num_categories),
      counts_(static_cast<std::size_t>(num_categories) * static_cast<std::size_t>(num_categories), 0),
      unpredicted_(static_cast<std::size_t>(num_categories), 0) {
  if (num_categories <= 0) throw ValidationError("num_categories must be positive");
}

void ConfusionMatrix::add(std::span<const Label> pred, std::span<const Label> gt) {
  if (pred.size() != gt.size()) throw ValidationError("prediction and ground truth differ in length");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt[i]) continue;
    const int g = *gt[i];
    if (g < 0 || g >= c_) throw ValidationError("ground-truth category out of range");
    if (!pred[i]) {
      ++unpredicted_[static_cast<std::size_t>(g)];
      continue;
    }
    const int p = *pred[i];
    if (p < 0 || p >= c_) throw ValidationError("predicted category out of range");
    ++counts_[static_cast<std::size_t>(g * c_ + p)];
  }
}

std::uint64_t ConfusionMatrix::count(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt * c_ + pred)]; }

Metrics ConfusionMatrix::metrics() const {
  Metrics m;
  m.iou.resize(static_cast<std::size_t>(c_));
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < c_; ++c) {
    std::uint64_t tp = count(c, c), fp = 0, fn = unpredicted_[static_cast<std::size_t>(c)];
    for (int o = 0; o < c_; ++o) {
      if (o == c) continue;
      fp += count(o, c);
      fn += count(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    m.iou[static_cast<std::size_t>(c)] = iou;
    sum += iou;
    ++defined;
  }
  m.miou = defined > 0 ? sum / defined : 0.0;
  return m;
}

Metrics miou(std::span<const Label> pred, std::span<const Label> gt, int num_categories) {
  ConfusionMatrix cm(num_categories);
  cm.add(pred, gt);
  return cm.metrics();
}

}  // namespace otoc
