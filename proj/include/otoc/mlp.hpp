#pragma once

#include <vector>

#include <Eigen/Dense>

#include "otoc/rng.hpp"
#include "otoc/types.hpp"

namespace otoc {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Fully connected network: ReLU on hidden layers, linear output.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network with the given layer sizes (input first, output last).
  explicit Mlp(std::vector<int> layer_sizes);
  /// He-normal weights, zero biases.
  static Mlp he_init(std::vector<int> layer_sizes, CounterRng& rng);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t num_parameters() const;
  /// Parameters in layer order: row-major weights, then biases.
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);

  /// activations[0] is the input; activations[l] is the output of layer l.
  struct Cache {
    std::vector<RowMatrix> activations;
    const RowMatrix& output() const { return activations.back(); }
    /// Last hidden activation (the input itself for single-layer networks).
    const RowMatrix& penultimate() const { return activations[activations.size() - 2]; }
  };

  /// Batched forward pass, one sample per row.
  Cache forward(const RowMatrix& input) const;
  RowMatrix predict(const RowMatrix& input) const { return forward(input).output(); }

  /// Gradient of a scalar loss given dLoss/dOutput for the batch in `cache`.
  /// Returned in flat_parameters() order. If grad_input is non-null it receives dLoss/dInput.
  Eigen::VectorXd backward(const Cache& cache, const RowMatrix& grad_output, RowMatrix* grad_input = nullptr) const;

  void validate() const;

 private:
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

struct MlpForward {
  Eigen::VectorXd output;
  Mlp::Cache cache;
};

/// Single-sample forward pass.
MlpForward mlp_forward(const Mlp& model, const Eigen::VectorXd& input);

/// SGD with classical momentum over flat parameters.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), mu_(momentum) {}
  void step(Mlp& model, const Eigen::VectorXd& grad);

 private:
  double lr_;
  double mu_;
  Eigen::VectorXd velocity_;
};

/// Row-wise softmax with max subtraction.
RowMatrix softmax_rows(const RowMatrix& logits);

}  // namespace otoc
