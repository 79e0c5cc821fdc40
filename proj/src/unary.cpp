#include "otoc/unary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "otoc/error.hpp"

namespace otoc {

std::vector<Label> point_labels(const PseudoLabels& labels, const SuperVoxelPartition& part) {
  if (labels.size() != part.num_supervoxels()) throw ValidationError("pseudo labels do not match the partition");
  std::vector<Label> out(part.num_points());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels.entries[static_cast<std::size_t>(part.id_of(i))].label;
  return out;
}

LossGradient cross_entropy_loss(const Mlp& model, const RowMatrix& inputs, std::span<const int> targets) {
  if (static_cast<std::size_t>(inputs.rows()) != targets.size()) throw ValidationError("one target per row required");
  const auto cache = model.forward(inputs);
  RowMatrix grad = softmax_rows(cache.output());
  const double b = static_cast<double>(inputs.rows());
  LossGradient out;
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    out.loss -= std::log(std::max(grad(i, t), 1e-300));
    grad(i, t) -= 1.0;
  }
  out.loss /= b;
  grad /= b;
  out.gradient = model.backward(cache, grad);
  return out;
}

UnaryResult train_unary(std::span<const LabeledScene> scenes, int num_categories, const TrainConfig& cfg,
                        std::uint64_t seed, const Mlp* init) {
  struct Ref {
    const FeatureMatrix* features;
    int row;
    int label;
  };
  std::vector<Ref> pool;
  int dim = -1;
  for (const auto& s : scenes) {
    if (static_cast<std::size_t>(s.features->rows()) != s.labels.size()) throw ValidationError("labels do not match features");
    dim = static_cast<int>(s.features->cols());
    for (std::size_t i = 0; i < s.labels.size(); ++i)
      if (s.labels[i]) {
        if (*s.labels[i] < 0 || *s.labels[i] >= num_categories) throw ValidationError("label out of range");
        pool.push_back({s.features, static_cast<int>(i), *s.labels[i]});
      }
  }
  if (pool.empty()) throw ValidationError("empty supervision");

  CounterRng rng(seed);
  UnaryResult result;
  if (init != nullptr) {
    result.model = *init;
  } else {
    std::vector<int> sizes{dim};
    sizes.insert(sizes.end(), cfg.unary_hidden.begin(), cfg.unary_hidden.end());
    sizes.push_back(num_categories);
    CounterRng init_rng = rng.split(1);
    result.model = Mlp::he_init(sizes, init_rng);
  }
  SgdMomentum opt(cfg.learning_rate, cfg.sgd_momentum);
  CounterRng order_rng = rng.split(2);

  const std::size_t per_epoch =
      cfg.max_points_per_epoch > 0 ? std::min(pool.size(), static_cast<std::size_t>(cfg.max_points_per_epoch)) : pool.size();
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  RowMatrix batch;
  std::vector<int> targets;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < per_epoch && i + 1 < order.size(); ++i)
      std::swap(order[i], order[i + static_cast<std::size_t>(order_rng.uniform_below(order.size() - i))]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < per_epoch; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(per_epoch, start + static_cast<std::size_t>(cfg.batch_size));
      batch.resize(static_cast<Eigen::Index>(end - start), dim);
      targets.resize(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto& ref = pool[order[b]];
        batch.row(static_cast<Eigen::Index>(b - start)) = ref.features->row(ref.row);
        targets[b - start] = ref.label;
      }
      const auto cache = result.model.forward(batch);
      RowMatrix grad = softmax_rows(cache.output());
      for (Eigen::Index r = 0; r < grad.rows(); ++r) {
        const int t = targets[static_cast<std::size_t>(r)];
        Eigen::Index arg;
        grad.row(r).maxCoeff(&arg);
        if (arg == t) ++correct;
        loss_sum -= std::log(std::max(grad(r, t), 1e-300));
        grad(r, t) -= 1.0;
      }
      grad /= static_cast<double>(grad.rows());
      opt.step(result.model, result.model.backward(cache, grad));
    }
    result.final_loss = loss_sum / static_cast<double>(per_epoch);
    result.final_accuracy = static_cast<double>(correct) / static_cast<double>(per_epoch);
  }
  return result;
}

UnaryResult train_unary(const FeatureMatrix& features, const PseudoLabels& labels, const SuperVoxelPartition& part,
                        int num_categories, const TrainConfig& cfg, std::uint64_t seed) {
  const LabeledScene scene{&features, point_labels(labels, part)};
  return train_unary(std::span<const LabeledScene>(&scene, 1), num_categories, cfg, seed);
}

UnaryPrediction predict_unary(const Mlp& model, const FeatureMatrix& features) {
  const auto cache = model.forward(features);
  return {softmax_rows(cache.output()), cache.penultimate()};
}

}  // namespace otoc
