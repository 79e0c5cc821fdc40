#include "otoc/mlp.hpp"

#include <cmath>
#include <string>

#include "otoc/error.hpp"

namespace otoc {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ValidationError("an MLP needs at least input and output sizes");
  for (int s : sizes_)
    if (s <= 0) throw ValidationError("layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
    layers_.push_back({Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]), Eigen::VectorXd::Zero(sizes_[l + 1])});
}

Mlp Mlp::he_init(std::vector<int> layer_sizes, CounterRng& rng) {
  Mlp m(std::move(layer_sizes));
  for (auto& layer : m.layers_) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.normal(0.0, stddev);
  }
  return m;
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::VectorXd Mlp::flat_parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(num_parameters()));
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat[k++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat[k++] = l.bias[r];
  }
  return flat;
}

void Mlp::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_parameters()) throw ValidationError("parameter count mismatch");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
  }
}

Mlp::Cache Mlp::forward(const RowMatrix& input) const {
  if (input.cols() != input_dim())
    throw ValidationError("input has " + std::to_string(input.cols()) + " columns, model expects " +
                          std::to_string(input_dim()));
  Cache cache;
  cache.activations.reserve(layers_.size() + 1);
  cache.activations.push_back(input);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    RowMatrix h = cache.activations.back() * layer.weight.transpose();
    h.rowwise() += layer.bias.transpose();
    if (l + 1 < layers_.size()) h = h.cwiseMax(0.0);
    cache.activations.push_back(std::move(h));
  }
  return cache;
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const RowMatrix& grad_output, RowMatrix* grad_input) const {
  Eigen::VectorXd grad(static_cast<Eigen::Index>(num_parameters()));
  // Offsets of each layer's block in the flat vector.
  std::vector<Eigen::Index> offset(layers_.size());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offset[l] = k;
    k += layers_[l].weight.size() + layers_[l].bias.size();
  }

  RowMatrix g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const RowMatrix& in = cache.activations[l];
    const Eigen::MatrixXd dw = g.transpose() * in;
    const Eigen::VectorXd db = g.colwise().sum().transpose();
    Eigen::Index o = offset[l];
    for (Eigen::Index r = 0; r < dw.rows(); ++r)
      for (Eigen::Index c = 0; c < dw.cols(); ++c) grad[o++] = dw(r, c);
    for (Eigen::Index r = 0; r < db.size(); ++r) grad[o++] = db[r];
    if (l == 0 && grad_input == nullptr) break;
    RowMatrix prev = g * layer.weight;
    if (l > 0) prev = prev.cwiseProduct((in.array() > 0.0).cast<double>().matrix());
    g = std::move(prev);
  }
  if (grad_input != nullptr) *grad_input = std::move(g);
  return grad;
}

void Mlp::validate() const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() != sizes_[l + 1] || layer.weight.cols() != sizes_[l] || layer.bias.size() != sizes_[l + 1])
      throw ValidationError("layer " + std::to_string(l) + " dimensions do not chain");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw ValidationError("non-finite parameters in layer " + std::to_string(l));
  }
}

MlpForward mlp_forward(const Mlp& model, const Eigen::VectorXd& input) {
  if (input.size() != model.input_dim()) throw ValidationError("input dimension mismatch");
  RowMatrix x = input.transpose();
  MlpForward out;
  out.cache = model.forward(x);
  out.output = out.cache.output().row(0).transpose();
  return out;
}

void SgdMomentum::step(Mlp& model, const Eigen::VectorXd& grad) {
  if (velocity_.size() != grad.size()) velocity_ = Eigen::VectorXd::Zero(grad.size());
  velocity_ = mu_ * velocity_ + grad;
  model.set_flat_parameters(model.flat_parameters() - lr_ * velocity_);
}

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace otoc
