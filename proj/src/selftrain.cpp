#include "otoc/selftrain.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "otoc/error.hpp"
#include "otoc/unary.hpp"

namespace otoc {

namespace {

int num_categories(std::span<const PreparedScene> scenes) { return scenes.front().scene.num_categories; }

Models train_models(std::span<const PreparedScene> train, std::span<const std::vector<Label>> point_targets,
                    std::span<const LabeledSuperVoxel> sv_targets, const TrainConfig& cfg, std::uint64_t seed,
                    const Models* warm, IterationMetrics& metrics) {
  const int c = num_categories(train);
  CounterRng rng(seed);

  std::vector<LabeledScene> labeled;
  for (std::size_t s = 0; s < train.size(); ++s) labeled.push_back({&train[s].features, point_targets[s]});
  const auto unary = train_unary(labeled, c, cfg, rng.split(10).next_u64(), warm ? &warm->unary : nullptr);
  Models models{unary.model, std::nullopt, std::nullopt};
  metrics.train_loss_unary = unary.final_loss;

  if (cfg.mode == PropagationMode::kGraphRelation) {
    CounterRng bank_rng = rng.split(20);
    MemoryBank bank = warm && warm->bank ? *warm->bank
                                         : MemoryBank::random(c, cfg.embed_dim, cfg.temperature, cfg.key_momentum, bank_rng);
    const Mlp* rel_init = warm && warm->relation ? &*warm->relation : nullptr;
    auto rel = train_relation(sv_targets, std::move(bank), static_cast<int>(train.front().features.cols()), cfg,
                              rng.split(30).next_u64(), rel_init);
    if (rel.degenerate) std::cerr << "warning: relation network trained on a single category\n";
    models.relation = std::move(rel.model);
    models.bank = std::move(rel.bank);
    metrics.train_loss_relation = rel.final_loss;
  }
  return models;
}

std::vector<LabeledSuperVoxel> labeled_supervoxels(std::span<const PreparedScene> train,
                                                   std::span<const PseudoLabels> labels) {
  std::vector<LabeledSuperVoxel> out;
  for (std::size_t s = 0; s < train.size(); ++s)
    for (std::size_t j = 0; j < labels[s].size(); ++j)
      if (const auto& l = labels[s].entries[j].label)
        out.push_back({&train[s].features, &train[s].partition, static_cast<int>(j), *l});
  return out;
}

}  // namespace

PreparedScene prepare_scene(Scene scene, const TrainConfig& cfg) {
  scene.validate();
  const KnnGraph knn(scene.points, cfg.k_neighbors);
  FeatureMatrix features = extract_features(scene, knn);
  SuperVoxelPartition part = cfg.partition.k_neighbors == cfg.k_neighbors
                                 ? partition_region_growing(scene, features, knn, cfg.partition)
                                 : partition_region_growing(scene, features, cfg.partition);
  return {std::move(scene), std::move(features), std::move(part)};
}

PreparedScene prepare_scene(Scene scene, SuperVoxelPartition partition, const TrainConfig& cfg) {
  scene.validate();
  if (partition.num_points() != scene.size()) throw ValidationError("partition does not match the scene");
  FeatureMatrix features = extract_features(scene, cfg.k_neighbors);
  return {std::move(scene), std::move(features), std::move(partition)};
}

double SelfTrainState::coverage() const {
  std::size_t labeled = 0, total = 0;
  for (const auto& l : labels) {
    total += l.size();
    for (const auto& e : l.entries) labeled += e.label ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(labeled) / static_cast<double>(total);
}

SelfTrainState initial_state(std::span<const PreparedScene> train, const TrainConfig& cfg, std::uint64_t seed) {
  if (train.empty()) throw ValidationError("no training scenes");
  CounterRng rng(seed);
  SelfTrainState state;
  for (std::size_t s = 0; s < train.size(); ++s) {
    const auto clicks = simulate_clicks(train[s].scene, rng.split(1000 + s).next_u64(), cfg.clicks_per_thing,
                                        cfg.thing_fraction);
    state.seeds.push_back(expand_clicks(clicks, train[s].partition));
  }
  state.labels = state.seeds;
  return state;
}

RowMatrix propagate(const PreparedScene& ps, const Models& models, const TrainConfig& cfg,
                    const SweepObserver& observer) {
  const auto pred = predict_unary(models.unary, ps.features);
  RowMatrix unary = pool_distribution(pred.probs, ps.partition);
  switch (cfg.mode) {
    case PropagationMode::kUnaryOnly:
      return unary;
    case PropagationMode::kGraph: {
      PairwiseParams pp = cfg.pairwise;
      pp.lambda_f = 0.0;
      const auto graph = build_graph(ps.partition, ps.scene, pred.penultimate, RowMatrix(), pp, cfg.graph_keep_nearest);
      return mean_field(graph, unary, cfg.mean_field_iterations, observer).q;
    }
    case PropagationMode::kGraphRelation: {
      if (!models.relation || !models.bank) throw ValidationError("relation network missing");
      const RowMatrix f = embed_supervoxels(*models.relation, ps.features, ps.partition);
      unary = combine_probs(unary, relation_probs(f, *models.bank));
      const auto graph = build_graph(ps.partition, ps.scene, pred.penultimate, f, cfg.pairwise, cfg.graph_keep_nearest);
      return mean_field(graph, unary, cfg.mean_field_iterations, observer).q;
    }
  }
  throw ValidationError("unknown propagation mode");
}

PseudoLabels update_pseudo_labels(const RowMatrix& q, double threshold, const PseudoLabels& seeds) {
  if (!(threshold > 0.0)) throw ValidationError("threshold must be positive");
  if (static_cast<std::size_t>(q.rows()) != seeds.size()) throw ValidationError("marginals do not match the labels");
  const auto map = map_labels(MarginalField{q});
  PseudoLabels out;
  out.entries.resize(seeds.size());
  for (std::size_t j = 0; j < seeds.size(); ++j) {
    if (seeds.entries[j].provenance == Provenance::kSeed) {
      out.entries[j] = seeds.entries[j];
    } else if (map[j].confidence >= threshold) {
      out.entries[j] = {map[j].label, static_cast<float>(map[j].confidence), Provenance::kPropagated};
    }
  }
  return out;
}

std::vector<Label> infer(const PreparedScene& ps, const Models& models, const TrainConfig& cfg, bool no_propagation,
                         const SweepObserver& observer) {
  std::vector<Label> out(ps.scene.size());
  if (no_propagation) {
    const auto pred = predict_unary(models.unary, ps.features);
    for (Eigen::Index i = 0; i < pred.probs.rows(); ++i) {
      Eigen::Index arg;
      pred.probs.row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(arg);
    }
    return out;
  }
  const auto map = map_labels(MarginalField{propagate(ps, models, cfg, observer)});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = map[static_cast<std::size_t>(ps.partition.id_of(i))].label;
  return out;
}

std::optional<double> evaluate(std::span<const PreparedScene> scenes, const Models& models, const TrainConfig& cfg,
                               bool no_propagation) {
  if (scenes.empty()) return std::nullopt;
  ConfusionMatrix cm(num_categories(scenes));
  bool any_gt = false;
  for (const auto& ps : scenes) {
    for (const auto& g : ps.scene.gt_semantic) any_gt = any_gt || g.has_value();
    cm.add(infer(ps, models, cfg, no_propagation), ps.scene.gt_semantic);
  }
  if (!any_gt) return std::nullopt;
  return cm.metrics().miou;
}

SelfTrainState run_iteration(SelfTrainState state, std::span<const PreparedScene> train, const TrainConfig& cfg,
                             std::uint64_t seed, std::span<const PreparedScene> eval) {
  cfg.validate();
  if (state.labels.size() != train.size()) throw ValidationError("one label set per training scene required");

  IterationMetrics metrics;
  metrics.iteration = state.iteration + 1;
  std::vector<std::vector<Label>> targets;
  for (std::size_t s = 0; s < train.size(); ++s) targets.push_back(point_labels(state.labels[s], train[s].partition));
  const auto sv = labeled_supervoxels(train, state.labels);
  const CounterRng rng(seed);
  const Models* warm = cfg.warm_start && state.models ? &*state.models : nullptr;
  Models models = train_models(train, targets, sv, cfg, rng.split(static_cast<std::uint64_t>(metrics.iteration)).next_u64(),
                               warm, metrics);

  std::size_t propagated = 0;
  for (std::size_t s = 0; s < train.size(); ++s) {
    state.labels[s] = update_pseudo_labels(propagate(train[s], models, cfg), cfg.confidence_threshold, state.seeds[s]);
    for (const auto& e : state.labels[s].entries) propagated += e.provenance == Provenance::kPropagated ? 1 : 0;
  }
  if (propagated == 0) std::cerr << "warning: iteration " << metrics.iteration << " propagated no labels\n";

  metrics.coverage = state.coverage();
  metrics.miou = evaluate(eval, models, cfg);
  state.models = std::move(models);
  state.iteration = metrics.iteration;
  state.log.push_back(metrics);
  return state;
}

RunReport run(const TrainConfig& cfg, std::span<const PreparedScene> train, std::span<const PreparedScene> eval,
              std::uint64_t seed) {
  cfg.validate();
  SelfTrainState state = initial_state(train, cfg, seed);
  for (int t = 0; t < cfg.self_train_iterations; ++t) {
    const double before = state.coverage();
    state = run_iteration(std::move(state), train, cfg, seed, eval);
    if (cfg.early_stop_delta > 0.0 && t > 0 && std::abs(state.coverage() - before) < cfg.early_stop_delta) break;
  }
  RunReport report;
  report.iterations = state.log;
  if (!report.iterations.empty()) report.final_miou = report.iterations.back().miou;
  if (state.models) report.models = *state.models;
  report.state = std::move(state);
  return report;
}

RunReport run_fully_supervised(const TrainConfig& cfg, std::span<const PreparedScene> train,
                               std::span<const PreparedScene> eval, std::uint64_t seed) {
  cfg.validate();
  if (train.empty()) throw ValidationError("no training scenes");
  std::vector<std::vector<Label>> targets;
  std::vector<PseudoLabels> majority;
  for (const auto& ps : train) {
    targets.push_back(ps.scene.gt_semantic);
    PseudoLabels labels;
    labels.entries.resize(ps.partition.num_supervoxels());
    for (std::size_t j = 0; j < labels.size(); ++j) {
      std::map<int, int> votes;
      for (int i : ps.partition.members(j))
        if (const auto& g = ps.scene.gt_semantic[static_cast<std::size_t>(i)]) ++votes[*g];
      int best = -1, best_n = 0;
      for (auto [c, n] : votes)
        if (n > best_n) best = c, best_n = n;
      if (best >= 0) labels.entries[j] = {best, 1.0f, Provenance::kSeed};
    }
    majority.push_back(std::move(labels));
  }
  IterationMetrics metrics;
  metrics.iteration = 1;
  const auto sv = labeled_supervoxels(train, majority);
  const CounterRng rng(seed);
  RunReport report;
  report.models = train_models(train, targets, sv, cfg, rng.split(1).next_u64(), nullptr, metrics);
  metrics.coverage = 1.0;
  metrics.miou = evaluate(eval, report.models, cfg);
  report.iterations.push_back(metrics);
  report.final_miou = metrics.miou;
  report.state.labels = majority;
  report.state.seeds = std::move(majority);
  report.state.iteration = 1;
  report.state.models = report.models;
  report.state.log = report.iterations;
  return report;
}

std::string report_csv(std::span<const IterationMetrics> rows) {
  std::ostringstream out;
  out << "iteration,coverage,train_loss_unary,train_loss_relation,miou\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.iteration << ',' << num(r.coverage) << ',' << num(r.train_loss_unary) << ','
        << (r.train_loss_relation ? num(*r.train_loss_relation) : std::string()) << ','
        << (r.miou ? num(*r.miou) : std::string()) << '\n';
  }
  return out.str();
}

}  // namespace otoc
