#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "otoc/error.hpp"
#include "otoc/graph.hpp"
#include "otoc/supervoxel.hpp"
#include "test_util.hpp"

using namespace otoc;

TEST(Kernel, WorkedValues) {
  const PairwiseParams pp;
  EXPECT_EQ(kernel_weight(0, 0, 0, 0, pp), 1.0);
  EXPECT_NEAR(kernel_weight(0.5, 0.5, 0.25, 0.75, pp), std::exp(-1.0), 1e-12);
  PairwiseParams off;
  off.lambda_c = off.lambda_p = off.lambda_u = off.lambda_f = 0;
  EXPECT_EQ(kernel_weight(3, 4, 5, 6, off), 1.0);
  PairwiseParams wide;
  wide.sigma_p = 2.0;
  wide.lambda_c = 3.0;
  EXPECT_NEAR(kernel_weight(0.1, 0.8, 0, 0, wide), std::exp(-3.0 * 0.1 / 2 - 0.8 / 8), 1e-15);
}

TEST(Kernel, IdenticalNodesAndStandardization) {
  RowMatrix color(3, 3), coord(3, 3);
  color << 0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.9, 0.2, 0.3;
  coord << 1, 2, 3, 1, 2, 3, 4, 2, 0;
  const auto g = graph_from_nodes(color, coord, RowMatrix(), RowMatrix(), PairwiseParams{});
  EXPECT_EQ(g.weights(0, 1), 1.0);
  EXPECT_EQ(g.weights(0, 0), 0.0);
  // Constant columns standardize to zero; others to zero mean, unit variance.
  EXPECT_EQ(g.color.col(1), Eigen::VectorXd::Zero(3));
  EXPECT_NEAR(g.color.col(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(g.color.col(0).squaredNorm() / 3.0, 1.0, 1e-12);
  const double d2 = (g.color.row(0) - g.color.row(2)).squaredNorm() + (g.coord.row(0) - g.coord.row(2)).squaredNorm();
  EXPECT_NEAR(g.weights(0, 2), std::exp(-d2 / 2), 1e-12);
  EXPECT_EQ(g.weights(0, 2), g.weights(2, 0));
}

TEST(Kernel, MatchesBruteForceOnRandomNodes) {
  std::mt19937 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const int m = 9;
  RowMatrix c(m, 3), p(m, 3), u(m, 5), f(m, 4);
  for (RowMatrix* x : {&c, &p, &u, &f})
    for (int i = 0; i < m; ++i)
      for (int d = 0; d < x->cols(); ++d) (*x)(i, d) = n(gen);
  for (int i = 0; i < m; ++i) f.row(i).normalize();
  PairwiseParams pp;
  pp.sigma_u = 3.0;
  pp.lambda_f = 0.5;
  const auto g = graph_from_nodes(c, p, u, f, pp);
  auto standardize = [](const RowMatrix& x) {
    RowMatrix out = x;
    for (int d = 0; d < x.cols(); ++d) {
      double mean = 0, var = 0;
      for (int i = 0; i < x.rows(); ++i) mean += x(i, d) / x.rows();
      for (int i = 0; i < x.rows(); ++i) var += (x(i, d) - mean) * (x(i, d) - mean) / x.rows();
      for (int i = 0; i < x.rows(); ++i) out(i, d) = (x(i, d) - mean) / std::sqrt(var);
    }
    return out;
  };
  const RowMatrix cs = standardize(c), ps = standardize(p), us = standardize(u);
  auto d2 = [](const RowMatrix& x, int a, int b) {
    double s = 0;
    for (int d = 0; d < x.cols(); ++d) s += (x(a, d) - x(b, d)) * (x(a, d) - x(b, d));
    return s;
  };
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      const double w = std::exp(-d2(cs, a, b) / 2 - d2(ps, a, b) / 2 - d2(us, a, b) / 18 - 0.5 * d2(f, a, b) / 2);
      EXPECT_NEAR(g.weights(a, b), w, 1e-12);
    }
}

TEST(Kernel, KeepNearestIsSymmetricSubset) {
  CounterRng rng(4);
  const auto inst = test::random_crf(rng, 8, 3);
  RowMatrix color(8, 3), coord(8, 3);
  for (int j = 0; j < 8; ++j) {
    color.row(j) << rng.uniform(), rng.uniform(), rng.uniform();
    coord.row(j) << rng.uniform(), rng.uniform(), rng.uniform();
  }
  const auto dense = graph_from_nodes(color, coord, RowMatrix(), RowMatrix(), PairwiseParams{});
  const auto sparse = graph_from_nodes(color, coord, RowMatrix(), RowMatrix(), PairwiseParams{}, 2);
  for (int a = 0; a < 8; ++a) {
    int kept = 0;
    for (int b = 0; b < 8; ++b) {
      EXPECT_EQ(sparse.weights(a, b), sparse.weights(b, a));
      if (sparse.weights(a, b) != 0) {
        ++kept;
        EXPECT_EQ(sparse.weights(a, b), dense.weights(a, b));
      }
    }
    EXPECT_GE(kept, 2);
  }
}

TEST(BuildGraph, PoolsThenStandardizes) {
  Scene s = test::grid_plane(4, 3, 0.5, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) s.colors[i] = Eigen::Vector3d(0.1 * (i % 4), 0.5, 0.05 * i);
  std::vector<int> ids(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ids[i] = static_cast<int>(i / 3);
  const SuperVoxelPartition part(ids);
  RowMatrix pts(s.size(), 3), cols(s.size(), 3);
  for (std::size_t i = 0; i < s.size(); ++i) {
    pts.row(i) = s.points[i].transpose();
    cols.row(i) = s.colors[i].transpose();
  }
  const auto g = build_graph(part, s, RowMatrix(), RowMatrix(), PairwiseParams{});
  const auto ref = graph_from_nodes(pool_vectors(cols, part), pool_vectors(pts, part), RowMatrix(), RowMatrix(), PairwiseParams{});
  EXPECT_EQ(g.weights, ref.weights);
  EXPECT_EQ(g.size(), 4u);
}

TEST(MeanField, NoEdgesIsIdentity) {
  RowMatrix u(1, 3);
  u << 0.2, 0.3, 0.5;
  SuperVoxelGraph g;
  g.weights = RowMatrix::Zero(1, 1);
  EXPECT_EQ(mean_field(g, u, 7).q, u);
  RowMatrix u3(3, 2);
  u3 << 0.9, 0.1, 0.3, 0.7, 0.5, 0.5;
  g.weights = RowMatrix::Zero(3, 3);
  EXPECT_EQ(mean_field(g, u3, 10).q, u3);
}

TEST(MeanField, TwoNodesPullTowardTheConfidentNeighbour) {
  SuperVoxelGraph g;
  g.weights = RowMatrix::Zero(2, 2);
  g.weights(0, 1) = g.weights(1, 0) = 1.0;
  RowMatrix u(2, 2);
  u << 0.9, 0.1, 0.5, 0.5;
  std::vector<double> trace{0.5};
  mean_field(g, u, 10, [&](int, const RowMatrix& q) { trace.push_back(q(1, 0)); });
  ASSERT_EQ(trace.size(), 11u);
  for (std::size_t t = 1; t < trace.size(); ++t) EXPECT_GE(trace[t], trace[t - 1] - 1e-12);
  EXPECT_GT(trace.back(), 0.7);
  // Scalar iteration of the synchronous update.
  double q0 = 0.9, q1 = 0.5;
  for (int t = 1; t <= 10; ++t) {
    const double a0 = 0.9 * std::exp(q1), b0 = 0.1 * std::exp(1 - q1);
    const double a1 = 0.5 * std::exp(q0), b1 = 0.5 * std::exp(1 - q0);
    q0 = a0 / (a0 + b0);
    q1 = a1 / (a1 + b1);
    EXPECT_NEAR(trace[t], q1, 1e-9);
  }
}

TEST(MeanField, SimplexEverySweep) {
  CounterRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = test::random_crf(rng, 8, 4);
    mean_field(inst.graph, inst.unary, 10, [](int, const RowMatrix& q) {
      for (int j = 0; j < q.rows(); ++j) {
        ASSERT_NEAR(q.row(j).sum(), 1.0, 1e-6);
        ASSERT_GE(q.row(j).minCoeff(), 0.0);
      }
    });
  }
}

TEST(MeanField, PermutationSymmetric) {
  CounterRng rng(6);
  const auto inst = test::random_crf(rng, 6, 3);
  const std::vector<int> perm{4, 2, 0, 5, 1, 3};
  SuperVoxelGraph pg;
  pg.weights = RowMatrix::Zero(6, 6);
  RowMatrix pu(6, 3);
  for (int a = 0; a < 6; ++a) {
    pu.row(perm[a]) = inst.unary.row(a);
    for (int b = 0; b < 6; ++b) pg.weights(perm[a], perm[b]) = inst.graph.weights(a, b);
  }
  const RowMatrix q = mean_field(inst.graph, inst.unary).q;
  const RowMatrix pq = mean_field(pg, pu).q;
  for (int a = 0; a < 6; ++a) EXPECT_LT((q.row(a) - pq.row(perm[a])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MeanField, RejectsBadInput) {
  SuperVoxelGraph g;
  g.weights = RowMatrix::Zero(2, 2);
  RowMatrix u(2, 2);
  u << 0.9, 0.2, 0.5, 0.5;
  EXPECT_THROW(mean_field(g, u), ValidationError);
  u(0, 1) = 0.1;
  EXPECT_THROW(mean_field(g, u, 0), ValidationError);
}

TEST(Energy, UnaryOnlyCases) {
  CounterRng rng(7);
  const auto inst = test::random_crf(rng, 5, 3);
  const std::vector<int> same(5, 2);
  double unary = 0;
  for (int j = 0; j < 5; ++j) unary -= std::log(inst.unary(j, 2) + 1e-12);
  EXPECT_NEAR(energy(inst.graph, inst.unary, same), unary, 1e-12);

  SuperVoxelGraph one;
  one.weights = RowMatrix::Zero(1, 1);
  RowMatrix u(1, 2);
  u << 0.25, 0.75;
  EXPECT_NEAR(energy(one, u, std::vector<int>{1}), -std::log(0.75 + 1e-12), 1e-15);
}

TEST(Energy, ExhaustiveMinimumMatchesEnumeration) {
  CounterRng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = test::random_crf(rng, 5, 3);
    const auto oracle = test::enumerate_energy(inst);
    double best = 1e300;
    std::vector<int> y(5);
    for (int code = 0; code < 243; ++code) {
      int c = code;
      for (int j = 0; j < 5; ++j, c /= 3) y[j] = c % 3;
      best = std::min(best, energy(inst.graph, inst.unary, y));
    }
    EXPECT_EQ(best, oracle.best);
    EXPECT_EQ(energy(inst.graph, inst.unary, oracle.labeling), oracle.best);
  }
}

TEST(MapLabels, TiesAndConfidence) {
  RowMatrix q(3, 2);
  q << 0.7, 0.3, 0.5, 0.5, 0.2, 0.8;
  const auto m = map_labels(MarginalField{q});
  EXPECT_EQ(m[0].label, 0);
  EXPECT_EQ(m[0].confidence, 0.7);
  EXPECT_EQ(m[1].label, 0);
  EXPECT_EQ(m[2].label, 1);
  // Per-point mean log probability over a 3-point super-voxel sharing the row.
  double mean_log = 0;
  for (int i = 0; i < 3; ++i) mean_log += std::log(q(2, 1)) / 3;
  EXPECT_NEAR(m[2].confidence, std::exp(mean_log), 1e-15);
}
