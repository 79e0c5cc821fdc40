#include "otoc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "otoc/error.hpp"
#include "otoc/mlp.hpp"

namespace otoc {

namespace {

constexpr double kLogFloor = 1e-12;

void check_stochastic(const RowMatrix& p) {
  for (Eigen::Index j = 0; j < p.rows(); ++j)
    if (std::abs(p.row(j).sum() - 1.0) > 1e-6 || (p.row(j).array() < 0.0).any())
      throw ValidationError("row " + std::to_string(j) + " is not a probability distribution");
}

double row_d2(const RowMatrix& m, Eigen::Index a, Eigen::Index b) {
  return m.cols() == 0 ? 0.0 : (m.row(a) - m.row(b)).squaredNorm();
}

}  // namespace

void PairwiseParams::validate() const {
  for (double l : {lambda_c, lambda_p, lambda_u, lambda_f})
    if (!(l >= 0.0)) throw ValidationError("pairwise lambdas must be non-negative");
  for (double s : {sigma_c, sigma_p, sigma_u, sigma_f})
    if (!(s > 0.0)) throw ValidationError("pairwise sigmas must be positive");
}

double kernel_weight(double color_d2, double coord_d2, double unary_d2, double embed_d2, const PairwiseParams& pp) {
  return std::exp(-pp.lambda_c * color_d2 / (2.0 * pp.sigma_c * pp.sigma_c) -
                  pp.lambda_p * coord_d2 / (2.0 * pp.sigma_p * pp.sigma_p) -
                  pp.lambda_u * unary_d2 / (2.0 * pp.sigma_u * pp.sigma_u) -
                  pp.lambda_f * embed_d2 / (2.0 * pp.sigma_f * pp.sigma_f));
}

RowMatrix standardize_columns(const RowMatrix& m) {
  RowMatrix out = m;
  if (m.rows() == 0) return out;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mean = m.col(c).mean();
    const double var = (m.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd < 1e-12)
      out.col(c).setZero();
    else
      out.col(c) = ((m.col(c).array() - mean) / sd).matrix();
  }
  return out;
}

SuperVoxelGraph graph_from_nodes(const RowMatrix& color, const RowMatrix& coord, const RowMatrix& unary,
                                 const RowMatrix& embedding, const PairwiseParams& pp, int keep_nearest) {
  pp.validate();
  const Eigen::Index m = color.rows();
  for (const RowMatrix* f : {&coord, &unary, &embedding})
    if (f->cols() > 0 && f->rows() != m) throw ValidationError("node feature blocks differ in row count");
  if (!color.allFinite() || !coord.allFinite() || !unary.allFinite() || !embedding.allFinite())
    throw ValidationError("non-finite node features");

  SuperVoxelGraph g;
  g.color = standardize_columns(color);
  g.coord = standardize_columns(coord);
  g.unary = standardize_columns(unary);
  g.embedding = embedding;
  g.weights = RowMatrix::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const double w = kernel_weight(row_d2(g.color, a, b), row_d2(g.coord, a, b), row_d2(g.unary, a, b),
                                     row_d2(g.embedding, a, b), pp);
      g.weights(a, b) = w;
      g.weights(b, a) = w;
    }

  if (keep_nearest > 0 && keep_nearest < m - 1) {
    RowMatrix kept = RowMatrix::Zero(m, m);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    for (Eigen::Index a = 0; a < m; ++a) {
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      std::partial_sort(idx.begin(), idx.begin() + keep_nearest + 1, idx.end(), [&](Eigen::Index x, Eigen::Index y) {
        if (x == a) return false;
        if (y == a) return true;
        return g.weights(a, x) != g.weights(a, y) ? g.weights(a, x) > g.weights(a, y) : x < y;
      });
      for (int t = 0; t < keep_nearest; ++t) {
        const Eigen::Index b = idx[static_cast<std::size_t>(t)];
        kept(a, b) = kept(b, a) = g.weights(a, b);
      }
    }
    g.weights = std::move(kept);
  }
  return g;
}

SuperVoxelGraph build_graph(const SuperVoxelPartition& part, const Scene& scene, const RowMatrix& unary_features,
                            const RowMatrix& embeddings, const PairwiseParams& pp, int keep_nearest) {
  const auto n = static_cast<Eigen::Index>(scene.size());
  if (part.num_points() != scene.size()) throw ValidationError("partition does not match the scene");
  RowMatrix colors(n, 3), coords(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    colors.row(i) = scene.colors[static_cast<std::size_t>(i)].transpose();
    coords.row(i) = scene.points[static_cast<std::size_t>(i)].transpose();
  }
  if (unary_features.cols() > 0 && unary_features.rows() != n) throw ValidationError("unary features do not match the scene");
  if (embeddings.cols() > 0 && static_cast<std::size_t>(embeddings.rows()) != part.num_supervoxels())
    throw ValidationError("one embedding per super-voxel required");
  const RowMatrix unary = unary_features.cols() > 0 ? pool_vectors(unary_features, part) : RowMatrix();
  return graph_from_nodes(pool_vectors(colors, part), pool_vectors(coords, part), unary, embeddings, pp, keep_nearest);
}

MarginalField mean_field(const SuperVoxelGraph& graph, const RowMatrix& unary_probs, int iterations,
                         const SweepObserver& observer) {
  if (static_cast<std::size_t>(unary_probs.rows()) != graph.size())
    throw ValidationError("unary rows do not match the graph");
  if (iterations < 1) throw ValidationError("mean-field needs at least one sweep");
  check_stochastic(unary_probs);

  const RowMatrix log_unary = (unary_probs.array() + kLogFloor).log().matrix();
  const Eigen::VectorXd degree = graph.weights.rowwise().sum();
  MarginalField field{unary_probs};
  RowMatrix logits(unary_probs.rows(), unary_probs.cols());
  // Without edges the update reproduces the unary up to the log floor; keep it exact.
  const bool has_edges = (graph.weights.array() != 0.0).any();
  for (int t = 0; t < iterations; ++t) {
    if (!has_edges) {
      if (observer) observer(t + 1, field.q);
      continue;
    }
    // Potts message: sum_j' w(j,j') * (1 - Q_j'(l)) = degree_j - (W Q)_jl.
    const RowMatrix agree = graph.weights * field.q;
    logits = log_unary;
    logits.colwise() -= degree;
    logits += agree;
    field.q = softmax_rows(logits);
    if (observer) observer(t + 1, field.q);
  }
  return field;
}

double energy(const SuperVoxelGraph& graph, const RowMatrix& unary_probs, std::span<const int> labeling) {
  const auto m = static_cast<Eigen::Index>(graph.size());
  if (unary_probs.rows() != m || static_cast<Eigen::Index>(labeling.size()) != m)
    throw ValidationError("labeling does not match the graph");
  double e = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const int l = labeling[static_cast<std::size_t>(j)];
    if (l < 0 || l >= unary_probs.cols()) throw ValidationError("label out of range");
    e -= std::log(unary_probs(j, l) + kLogFloor);
  }
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b)
      if (labeling[static_cast<std::size_t>(a)] != labeling[static_cast<std::size_t>(b)]) e += graph.weights(a, b);
  return e;
}

std::vector<MapLabel> map_labels(const MarginalField& field) {
  std::vector<MapLabel> out(static_cast<std::size_t>(field.q.rows()));
  for (Eigen::Index j = 0; j < field.q.rows(); ++j) {
    int best = 0;
    for (Eigen::Index c = 1; c < field.q.cols(); ++c)
      if (field.q(j, c) > field.q(j, best)) best = static_cast<int>(c);
    out[static_cast<std::size_t>(j)] = {best, field.q(j, best)};
  }
  return out;
}

}  // namespace otoc
