#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "otoc/checkpoint.hpp"
#include "otoc/error.hpp"
#include "otoc/mlp.hpp"
#include "otoc/relation.hpp"
#include "otoc/unary.hpp"
#include "test_util.hpp"

using namespace otoc;

namespace {

RowMatrix random_matrix(int rows, int cols, std::mt19937& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RowMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = u(gen);
  return m;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

MemoryBank bank_of(RowMatrix keys, double tau, double m) {
  MemoryBank b;
  b.keys = std::move(keys);
  b.temperature = tau;
  b.momentum = m;
  return b;
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  const Mlp m({5, 4, 3});
  const auto out = mlp_forward(m, Eigen::VectorXd::Ones(5)).output;
  EXPECT_EQ(out, Eigen::VectorXd::Zero(3));
}

TEST(Mlp, IdentityLayerReproducesInput) {
  Mlp m({4, 4});
  m.layers()[0].weight = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd x(4);
  x << 1.5, -2.0, 0.25, 3.0;
  EXPECT_EQ(mlp_forward(m, x).output, x);
}

TEST(Mlp, MatchesLoopOracle) {
  CounterRng rng(3);
  const Mlp m = Mlp::he_init({6, 5, 3}, rng);
  std::mt19937 gen(1);
  const RowMatrix x = random_matrix(7, 6, gen);
  const RowMatrix out = m.predict(x);
  const auto& l0 = m.layers()[0];
  const auto& l1 = m.layers()[1];
  for (int r = 0; r < 7; ++r) {
    std::vector<double> h(5);
    for (int o = 0; o < 5; ++o) {
      double s = l0.bias[o];
      for (int i = 0; i < 6; ++i) s += l0.weight(o, i) * x(r, i);
      h[o] = s > 0 ? s : 0;
    }
    for (int o = 0; o < 3; ++o) {
      double s = l1.bias[o];
      for (int i = 0; i < 5; ++i) s += l1.weight(o, i) * h[i];
      EXPECT_NEAR(out(r, o), s, 1e-12);
    }
  }
}

TEST(Mlp, FlatParametersRoundTrip) {
  CounterRng rng(4);
  Mlp m = Mlp::he_init({3, 4, 2}, rng);
  const Eigen::VectorXd p = m.flat_parameters();
  EXPECT_EQ(p.size(), static_cast<Eigen::Index>(m.num_parameters()));
  EXPECT_EQ(m.num_parameters(), 3u * 4 + 4 + 4 * 2 + 2);
  Mlp z({3, 4, 2});
  z.set_flat_parameters(p);
  EXPECT_EQ(z.flat_parameters(), p);
  EXPECT_THROW(mlp_forward(m, Eigen::VectorXd::Zero(5)), ValidationError);
}

TEST(Unary, PredictionsAreDistributions) {
  const Mlp zero({4, 3});
  std::mt19937 gen(2);
  const RowMatrix x = random_matrix(5, 4, gen);
  const auto pz = predict_unary(zero, x);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(pz.probs(r, c), 1.0 / 3.0, 1e-15);
  CounterRng rng(5);
  const Mlp m = Mlp::he_init({4, 8, 3}, rng);
  const auto p = predict_unary(m, x);
  const RowMatrix logits = m.predict(x);
  EXPECT_EQ(p.penultimate.cols(), 8);
  for (int r = 0; r < 5; ++r) {
    EXPECT_NEAR(p.probs.row(r).sum(), 1.0, 1e-6);
    Eigen::Index a, b;
    p.probs.row(r).maxCoeff(&a);
    logits.row(r).maxCoeff(&b);
    EXPECT_EQ(a, b);
  }
}

TEST(Unary, InitialLossNearLogC) {
  CounterRng rng(6);
  Mlp m = Mlp::he_init({14, 64, 64, 6}, rng);
  // Balanced init: the output layer starts small so logits are near zero.
  m.layers().back().weight *= 0.01;
  std::mt19937 gen(7);
  const RowMatrix x = random_matrix(600, 14, gen, 0.0, 1.0);
  std::vector<int> t(600);
  for (int i = 0; i < 600; ++i) t[i] = i % 6;
  const double loss = cross_entropy_loss(m, x, t).loss;
  EXPECT_NEAR(loss, std::log(6.0), 0.1 * std::log(6.0));
}

TEST(Unary, CrossEntropyGradientMatchesFiniteDifferences) {
  CounterRng rng(8);
  Mlp m = Mlp::he_init({5, 7, 6, 4}, rng);
  std::mt19937 gen(9);
  const RowMatrix x = random_matrix(9, 5, gen);
  std::vector<int> t(9);
  for (int i = 0; i < 9; ++i) t[i] = static_cast<int>(gen() % 4);
  const Eigen::VectorXd g = cross_entropy_loss(m, x, t).gradient;
  const Eigen::VectorXd p0 = m.flat_parameters();
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<Eigen::Index>(gen() % p0.size());
    Eigen::VectorXd p = p0;
    p[k] += h;
    m.set_flat_parameters(p);
    const double up = cross_entropy_loss(m, x, t).loss;
    p[k] -= 2 * h;
    m.set_flat_parameters(p);
    const double down = cross_entropy_loss(m, x, t).loss;
    worst = std::max(worst, relative_error(g[k], (up - down) / (2 * h)));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Unary, SeparableToyIsLearned) {
  std::mt19937 gen(10);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RowMatrix x(400, 3);
  LabeledScene scene{&x, {}};
  for (int i = 0; i < 400; ++i) {
    const int cls = i % 2;
    x(i, 0) = cls ? 0.2 + 0.8 * (u(gen) + 1) / 2 : -0.2 - 0.8 * (u(gen) + 1) / 2;
    x(i, 1) = u(gen);
    x(i, 2) = u(gen);
    scene.labels.emplace_back(cls);
  }
  TrainConfig cfg;
  cfg.epochs = 30;
  const auto res = train_unary(std::span<const LabeledScene>(&scene, 1), 2, cfg, 1);
  EXPECT_GE(res.final_accuracy, 0.99);
  const auto p = predict_unary(res.model, x);
  int correct = 0;
  for (int i = 0; i < 400; ++i) correct += (p.probs(i, 1) > 0.5) == (i % 2 == 1);
  EXPECT_GE(correct, 396);
}

TEST(Unary, EmptySupervisionAndDeterminism) {
  std::mt19937 gen(11);
  RowMatrix x = random_matrix(50, 4, gen);
  LabeledScene none{&x, std::vector<Label>(50)};
  TrainConfig cfg;
  cfg.epochs = 3;
  EXPECT_THROW(train_unary(std::span<const LabeledScene>(&none, 1), 2, cfg, 1), ValidationError);
  LabeledScene some{&x, {}};
  for (int i = 0; i < 50; ++i) some.labels.emplace_back(i % 3 == 0 ? Label{} : Label{i % 2});
  const auto a = train_unary(std::span<const LabeledScene>(&some, 1), 2, cfg, 5);
  const auto b = train_unary(std::span<const LabeledScene>(&some, 1), 2, cfg, 5);
  const Eigen::VectorXd pa = a.model.flat_parameters(), pb = b.model.flat_parameters();
  EXPECT_EQ(std::memcmp(pa.data(), pb.data(), sizeof(double) * pa.size()), 0);
}

TEST(MemoryBank, MomentumLaw) {
  std::mt19937 gen(12);
  for (double m : {0.9, 1.0, 0.0}) {
    RowMatrix keys = random_matrix(3, 5, gen);
    for (int c = 0; c < 3; ++c) keys.row(c).normalize();
    MemoryBank bank = bank_of(keys, 0.07, m);
    Eigen::VectorXd f = random_matrix(5, 1, gen);
    f.normalize();
    bank.update(1, f);
    const Eigen::VectorXd expect = (m * keys.row(1).transpose() + (1 - m) * f).normalized();
    EXPECT_LT((bank.keys.row(1).transpose() - expect).cwiseAbs().maxCoeff(), 1e-12) << "m=" << m;
    if (m == 1.0) EXPECT_EQ(bank.keys, keys);
    if (m == 0.0) EXPECT_LT((bank.keys.row(1).transpose() - f).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(bank.keys.row(0), keys.row(0));
    EXPECT_NEAR(bank.keys.row(1).norm(), 1.0, 1e-6);
  }
}

TEST(MemoryBank, RandomKeysAreUnit) {
  CounterRng rng(1);
  const MemoryBank b = MemoryBank::random(6, 32, 0.07, 0.9, rng);
  b.validate();
  EXPECT_EQ(b.num_categories(), 6);
  EXPECT_EQ(b.dim(), 32);
}

TEST(Contrastive, ScalarExample) {
  RowMatrix keys = RowMatrix::Zero(2, 3);
  keys(0, 0) = 1;
  keys(1, 1) = 1;
  const MemoryBank bank = bank_of(keys, 0.07, 0.9);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
  f[0] = 1;
  const double expect = -std::log(std::exp(1 / 0.07) / (std::exp(1 / 0.07) + 1.0));
  EXPECT_NEAR(contrastive_loss(f, bank, 0), expect, 1e-15);
  EXPECT_NEAR(contrastive_loss(f, bank, 0), 6.2487e-7, 1e-11);
}

TEST(Contrastive, GradientMatchesFiniteDifferences) {
  std::mt19937 gen(13);
  CounterRng rng(14);
  Mlp m = Mlp::he_init({4, 6, 5}, rng);
  CounterRng krng(15);
  const MemoryBank bank = MemoryBank::random(3, 5, 0.5, 0.9, krng);
  const RowMatrix x = random_matrix(20, 4, gen);
  std::vector<RelationSample> samples;
  for (int s = 0; s < 6; ++s) {
    RelationSample rs{&x, {}, s % 3};
    for (int k = 0; k < 3; ++k) rs.points.push_back(static_cast<int>(gen() % 20));
    samples.push_back(rs);
  }
  const Eigen::VectorXd g = relation_loss(m, bank, samples).gradient;
  const Eigen::VectorXd p0 = m.flat_parameters();
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<Eigen::Index>(gen() % p0.size());
    Eigen::VectorXd p = p0;
    p[k] += h;
    m.set_flat_parameters(p);
    const double up = relation_loss(m, bank, samples).loss;
    p[k] -= 2 * h;
    m.set_flat_parameters(p);
    const double down = relation_loss(m, bank, samples).loss;
    worst = std::max(worst, relative_error(g[k], (up - down) / (2 * h)));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(RelationProbs, MatchesOracleAndLimits) {
  std::mt19937 gen(16);
  CounterRng krng(17);
  const MemoryBank bank = MemoryBank::random(4, 6, 0.07, 0.9, krng);
  RowMatrix f = random_matrix(5, 6, gen);
  for (int r = 0; r < 5; ++r) f.row(r).normalize();
  const RowMatrix p = relation_probs(f, bank);
  for (int r = 0; r < 5; ++r) {
    std::vector<double> e(4);
    double z = 0;
    for (int c = 0; c < 4; ++c) {
      double dot = 0;
      for (int d = 0; d < 6; ++d) dot += f(r, d) * bank.keys(c, d);
      z += e[c] = std::exp(dot / 0.07);
    }
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(p(r, c), e[c] / z, 1e-12);
  }
  RowMatrix eye = RowMatrix::Identity(3, 3);
  const RowMatrix one_hot = relation_probs(eye.topRows(1), bank_of(eye, 0.07, 0.9));
  EXPECT_GT(one_hot(0, 0), 0.999998);
  const RowMatrix flat = relation_probs(eye.topRows(1), bank_of(eye, 100.0, 0.9));
  EXPECT_NEAR(flat(0, 0), 1.0 / 3.0, 0.01);
}

TEST(Combine, Examples) {
  RowMatrix u(3, 2), r(3, 2);
  u << 0.8, 0.2, 0.6, 0.4, 1.0, 0.0;
  r << 0.5, 0.5, 0.25, 0.75, 0.0, 1.0;
  const RowMatrix c = combine_probs(u, r);
  EXPECT_NEAR(c(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(c(0, 1), 0.2, 1e-15);
  // 0.15 : 0.30 after the product.
  EXPECT_NEAR(c(1, 0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(c(1, 1), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(c(2, 0), 1.0);  // disjoint support falls back to the unary row
  EXPECT_EQ(c(2, 1), 0.0);
}

TEST(Combine, UniformRelationIsIdentity) {
  std::mt19937 gen(18);
  RowMatrix u = random_matrix(10, 5, gen, 0.0, 1.0);
  for (int i = 0; i < 10; ++i) u.row(i) /= u.row(i).sum();
  const RowMatrix c = combine_probs(u, RowMatrix::Constant(10, 5, 0.2));
  EXPECT_LT((c - u).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RelationTraining, KeysStayUnitAndDeterministic) {
  std::mt19937 gen(19);
  RowMatrix x = random_matrix(60, 4, gen);
  std::vector<int> ids(60);
  for (int i = 0; i < 60; ++i) ids[i] = i / 5;
  const SuperVoxelPartition part(ids);
  PseudoLabels pl;
  for (int j = 0; j < 12; ++j) pl.entries.push_back(j % 4 == 3 ? PseudoLabel{} : PseudoLabel{Label{j % 3}, 1.0f, Provenance::kSeed});
  TrainConfig cfg;
  cfg.relation_steps = 20;
  cfg.samples_per_category = 4;
  CounterRng krng(1);
  const MemoryBank bank = MemoryBank::random(3, 8, cfg.temperature, cfg.key_momentum, krng);
  const auto a = train_relation(x, pl, part, bank, cfg, 7);
  const auto b = train_relation(x, pl, part, bank, cfg, 7);
  a.bank.validate();
  EXPECT_FALSE(a.degenerate);
  EXPECT_EQ(a.bank.keys, b.bank.keys);
  EXPECT_EQ(a.model.flat_parameters(), b.model.flat_parameters());
  const RowMatrix emb = embed_supervoxels(a.model, x, part);
  for (int j = 0; j < 12; ++j) EXPECT_NEAR(emb.row(j).norm(), 1.0, 1e-12);

  PseudoLabels single;
  for (int j = 0; j < 12; ++j) single.entries.push_back(j == 0 ? PseudoLabel{Label{1}, 1.0f, Provenance::kSeed} : PseudoLabel{});
  EXPECT_TRUE(train_relation(x, single, part, bank, cfg, 7).degenerate);
}

TEST(Checkpoint, RoundTrip) {
  CounterRng rng(20);
  Checkpoint ck{Mlp::he_init({4, 3, 2}, rng), MemoryBank::random(2, 2, 0.07, 0.9, rng)};
  test::TempDir dir("ckpt");
  save_checkpoint(ck, dir / "a.otnn");
  const Checkpoint back = load_checkpoint(dir / "a.otnn");
  EXPECT_EQ(back.model.layer_sizes(), ck.model.layer_sizes());
  EXPECT_EQ(back.model.flat_parameters(), ck.model.flat_parameters());
  ASSERT_TRUE(back.bank.has_value());
  EXPECT_EQ(back.bank->keys, ck.bank->keys);
  EXPECT_EQ(back.bank->temperature, 0.07);
  Checkpoint plain{ck.model, std::nullopt};
  save_checkpoint(plain, dir / "b.otnn");
  EXPECT_FALSE(load_checkpoint(dir / "b.otnn").bank.has_value());
  EXPECT_EQ(std::filesystem::file_size(dir / "b.otnn"), 12u + 3u * 4u + 8u * (12 + 3 + 6 + 2) + 8u);
}
