#include "otoc/relation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "otoc/error.hpp"

namespace otoc {

namespace {

// Pooled embedding and the normalization factor needed for backprop.
Eigen::VectorXd normalized(const Eigen::VectorXd& g, double& norm) {
  norm = g.norm();
  if (norm < 1e-12) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(g.size());
    e[0] = 1.0;
    return e;
  }
  return g / norm;
}

}  // namespace

MemoryBank MemoryBank::random(int num_categories, int dim, double temperature, double momentum, CounterRng& rng) {
  MemoryBank bank;
  bank.temperature = temperature;
  bank.momentum = momentum;
  bank.keys.resize(num_categories, dim);
  for (int c = 0; c < num_categories; ++c) {
    for (int d = 0; d < dim; ++d) bank.keys(c, d) = rng.normal();
    bank.keys.row(c).normalize();
  }
  return bank;
}

void MemoryBank::update(int category, const Eigen::VectorXd& embedding) {
  if (category < 0 || category >= num_categories()) throw ValidationError("category out of range");
  if (embedding.size() != dim()) throw ValidationError("embedding dimension mismatch");
  Eigen::VectorXd k = momentum * keys.row(category).transpose() + (1.0 - momentum) * embedding;
  const double n = k.norm();
  // Antipodal key and embedding with m = 0.5 cancel exactly; keep the old key then.
  if (n > 1e-12) keys.row(category) = (k / n).transpose();
}

void MemoryBank::validate() const {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ValidationError("momentum must lie in [0, 1]");
  for (Eigen::Index c = 0; c < keys.rows(); ++c)
    if (std::abs(keys.row(c).norm() - 1.0) > 1e-6) throw ValidationError("memory bank key is not unit norm");
}

double contrastive_loss(const Eigen::VectorXd& embedding, const MemoryBank& bank, int category) {
  const Eigen::VectorXd logits = bank.keys * embedding / bank.temperature;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits[category];
}

RowMatrix relation_probs(const RowMatrix& embeddings, const MemoryBank& bank) {
  if (embeddings.cols() != bank.dim()) throw ValidationError("embedding dimension mismatch");
  return softmax_rows(embeddings * bank.keys.transpose() / bank.temperature);
}

RowMatrix combine_probs(const RowMatrix& unary, const RowMatrix& relation) {
  if (unary.rows() != relation.rows() || unary.cols() != relation.cols())
    throw ValidationError("probability matrices differ in shape");
  RowMatrix out = unary.cwiseProduct(relation);
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    const double mass = out.row(j).sum();
    if (mass < 1e-12)
      out.row(j) = unary.row(j);
    else
      out.row(j) /= mass;
  }
  return out;
}

RowMatrix embed_supervoxels(const Mlp& relation, const FeatureMatrix& features, const SuperVoxelPartition& part) {
  RowMatrix pooled = pool_vectors(relation.predict(features), part);
  for (Eigen::Index j = 0; j < pooled.rows(); ++j) {
    double norm;
    pooled.row(j) = normalized(pooled.row(j).transpose(), norm).transpose();
  }
  return pooled;
}

RelationLoss relation_loss(const Mlp& relation, const MemoryBank& bank, std::span<const RelationSample> samples) {
  if (samples.empty()) throw ValidationError("no relation samples");
  std::size_t total = 0;
  for (const auto& s : samples) {
    if (s.points.empty()) throw ValidationError("relation sample without points");
    total += s.points.size();
  }
  RowMatrix input(static_cast<Eigen::Index>(total), relation.input_dim());
  Eigen::Index r = 0;
  for (const auto& s : samples)
    for (int p : s.points) input.row(r++) = s.features->row(p);
  const auto cache = relation.forward(input);
  const RowMatrix& out = cache.output();

  RelationLoss result;
  result.embeddings.resize(static_cast<Eigen::Index>(samples.size()), relation.output_dim());
  RowMatrix grad_out(out.rows(), out.cols());
  const double inv_batch = 1.0 / static_cast<double>(samples.size());
  r = 0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto n = static_cast<Eigen::Index>(samples[s].points.size());
    const Eigen::VectorXd g = out.middleRows(r, n).colwise().mean().transpose();
    double norm;
    const Eigen::VectorXd f = normalized(g, norm);
    result.embeddings.row(static_cast<Eigen::Index>(s)) = f.transpose();

    const int cat = samples[s].category;
    const Eigen::VectorXd logits = bank.keys * f / bank.temperature;
    const double mx = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - mx).exp();
    const double z = p.sum();
    p /= z;
    result.loss += (mx + std::log(z) - logits[cat]) * inv_batch;

    // dL/df = K^T (p - onehot) / tau; through f = g / |g| and g = mean of member outputs.
    p[cat] -= 1.0;
    const Eigen::VectorXd dl_df = bank.keys.transpose() * p / bank.temperature;
    Eigen::VectorXd dl_dg = Eigen::VectorXd::Zero(g.size());
    if (norm >= 1e-12) dl_dg = (dl_df - f * f.dot(dl_df)) / norm;
    const Eigen::RowVectorXd per_point = (dl_dg * inv_batch / static_cast<double>(n)).transpose();
    for (Eigen::Index i = 0; i < n; ++i) grad_out.row(r + i) = per_point;
    r += n;
  }
  result.gradient = relation.backward(cache, grad_out);
  return result;
}

RelationResult train_relation(std::span<const LabeledSuperVoxel> labeled, MemoryBank bank, int feature_dim,
                              const TrainConfig& cfg, std::uint64_t seed, const Mlp* init) {
  bank.validate();
  std::map<int, std::vector<const LabeledSuperVoxel*>> by_category;
  for (const auto& l : labeled) {
    if (l.category < 0 || l.category >= bank.num_categories()) throw ValidationError("category out of range");
    by_category[l.category].push_back(&l);
  }
  if (by_category.empty()) throw ValidationError("empty supervision");

  CounterRng rng(seed);
  RelationResult result;
  result.degenerate = by_category.size() < 2;
  if (init != nullptr) {
    result.model = *init;
  } else {
    std::vector<int> sizes{feature_dim};
    sizes.insert(sizes.end(), cfg.relation_hidden.begin(), cfg.relation_hidden.end());
    sizes.push_back(bank.dim());
    CounterRng init_rng = rng.split(1);
    result.model = Mlp::he_init(sizes, init_rng);
  }
  SgdMomentum opt(cfg.learning_rate, cfg.sgd_momentum);
  CounterRng sample_rng = rng.split(2);

  const auto s = static_cast<std::size_t>(cfg.samples_per_category);
  const int tail_start = cfg.relation_steps - std::max(1, cfg.relation_steps / 10);
  int tail_count = 0;
  std::vector<RelationSample> batch;
  for (int step = 0; step < cfg.relation_steps; ++step) {
    batch.clear();
    for (auto& [cat, pool] : by_category) {
      // Without replacement when enough super-voxels exist, otherwise with replacement.
      const bool replace = pool.size() < s;
      for (std::size_t a = 0; a < s; ++a) {
        std::size_t pick;
        if (replace) {
          pick = static_cast<std::size_t>(sample_rng.uniform_below(pool.size()));
        } else {
          pick = a + static_cast<std::size_t>(sample_rng.uniform_below(pool.size() - a));
          std::swap(pool[a], pool[pick]);
          pick = a;
        }
        const auto* sv = pool[pick];
        const auto& members = sv->partition->members(static_cast<std::size_t>(sv->supervoxel));
        RelationSample sample{sv->features, {}, cat};
        const auto take = cfg.relation_points_per_sv > 0
                              ? std::min(members.size(), static_cast<std::size_t>(cfg.relation_points_per_sv))
                              : members.size();
        if (take == members.size()) {
          sample.points = members;
        } else {
          std::vector<int> m = members;
          for (std::size_t b = 0; b < take; ++b)
            std::swap(m[b], m[b + static_cast<std::size_t>(sample_rng.uniform_below(m.size() - b))]);
          sample.points.assign(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(take));
        }
        batch.push_back(std::move(sample));
      }
    }
    const auto step_loss = relation_loss(result.model, bank, batch);
    opt.step(result.model, step_loss.gradient);
    for (std::size_t b = 0; b < batch.size(); ++b)
      bank.update(batch[b].category, step_loss.embeddings.row(static_cast<Eigen::Index>(b)).transpose());
    if (step >= tail_start) {
      result.final_loss += step_loss.loss;
      ++tail_count;
    }
  }
  if (tail_count > 0) result.final_loss /= tail_count;
  result.bank = std::move(bank);
  return result;
}

RelationResult train_relation(const FeatureMatrix& features, const PseudoLabels& labels,
                              const SuperVoxelPartition& part, MemoryBank bank, const TrainConfig& cfg,
                              std::uint64_t seed) {
  if (labels.size() != part.num_supervoxels()) throw ValidationError("pseudo labels do not match the partition");
  std::vector<LabeledSuperVoxel> labeled;
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels.entries[j].label) labeled.push_back({&features, &part, static_cast<int>(j), *labels.entries[j].label});
  return train_relation(labeled, std::move(bank), static_cast<int>(features.cols()), cfg, seed);
}

}  // namespace otoc
