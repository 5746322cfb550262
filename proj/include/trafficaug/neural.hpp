#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "trafficaug/rng.hpp"
#include "trafficaug/types.hpp"

namespace trafficaug {

// ---------------------------------------------------------------------------
// Fully connected networks over row-major batches (rows are samples). All
// parameters and activations are 64-bit doubles.
// ---------------------------------------------------------------------------

enum class Activation { Linear, ReLU, LeakyReLU, Sigmoid, Softmax };

/// Elementwise/rowwise activation application.
Matrix apply_activation(const Matrix& z, Activation act, double leaky_slope);

/// Numerically stable helpers, exposed for reuse and testing.
Matrix sigmoid(const Matrix& z);
Matrix softmax_rows(const Matrix& z);
double softplus(double z);

struct DenseLayer {
  Matrix W;  ///< out x in.
  Vector b;  ///< out.
  Activation activation = Activation::Linear;
  double leaky_slope = 0.2;
  /// Fraction of post-activation units zeroed during training forwards
  /// (inverted dropout: survivors are scaled by 1/(1-rate)).
  double dropout = 0.0;

  Index in_dim() const { return W.cols(); }
  Index out_dim() const { return W.rows(); }
};

struct LayerSpec {
  Index in = 0;
  Index out = 0;
  Activation activation = Activation::Linear;
  double dropout = 0.0;
  double leaky_slope = 0.2;
};

struct LayerCache {
  Matrix input;    ///< Batch fed to the layer.
  Matrix preact;   ///< z = input W^T + b.
  Matrix postact;  ///< activation(z), before dropout.
  Matrix mask;     ///< Dropout scale mask; empty when no dropout was applied.
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix output;
};

struct Gradients {
  std::vector<Matrix> dW;
  std::vector<Vector> db;
};

struct BackwardResult {
  Gradients grads;
  Matrix input_grad;  ///< d(loss)/d(batch input); lets callers chain networks.
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  /// Builds a network with N(0, stddev^2) weights and zero biases.
  static Network random(std::span<const LayerSpec> specs, Rng& rng,
                        double weight_stddev = 0.02);

  Index input_dim() const;
  Index output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Inference pass: no dropout, nothing cached.
  Matrix forward_eval(const Matrix& batch) const;

  /// Caching pass without dropout. Use for gradient computation wherever
  /// dropout should not fire (e.g. a frozen network being differentiated
  /// through, or nets that have no dropout).
  Matrix forward_cached(const Matrix& batch, ForwardCache& cache) const;

  /// Training pass: dropout active, cache filled.
  Matrix forward_train(const Matrix& batch, Rng& rng, ForwardCache& cache) const;

  /// Backpropagates d(loss)/d(output) through the cached pass.
  BackwardResult backward(const ForwardCache& cache, const Matrix& output_grad) const;

  /// Fused backward for a Softmax head trained with categorical
  /// cross-entropy: starts from d(loss)/d(logits) = (p - targets)/B.
  /// The last layer must be Softmax with no dropout.
  BackwardResult backward_softmax_xent(const ForwardCache& cache,
                                       const Matrix& targets) const;

 private:
  Matrix run(const Matrix& batch, Rng* rng, ForwardCache* cache) const;

  std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Losses. Gradients are with respect to the loss *mean*, so optimizer steps
// are batch-size independent.
// ---------------------------------------------------------------------------

enum class LossKind {
  /// Binary cross-entropy evaluated on raw logits via the stable form
  /// max(z,0) - z t + log(1 + exp(-|z|)); mean over all elements.
  SigmoidCrossEntropyWithLogits,
  /// -sum_j t_ij log(max(p_ij, 1e-12)) averaged over rows; expects
  /// probability inputs (e.g. a Softmax head).
  CategoricalCrossEntropy,
};

struct LossResult {
  double value = 0.0;
  Matrix grad;  ///< Same shape as predictions.
};

LossResult loss_value_and_grad(LossKind kind, const Matrix& predictions,
                               const Matrix& targets);

// ---------------------------------------------------------------------------
// Adam optimizer (bias-corrected first and second moments).
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const Network& net, AdamConfig config);

  /// Applies one update in place. Gradient shapes must match the network.
  void step(Network& net, const Gradients& grads);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<Matrix> mW_, vW_;
  std::vector<Vector> mb_, vb_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned little-endian binary with a self-describing layer
// list followed by raw f64 parameter arrays.
// ---------------------------------------------------------------------------

void save_network(std::ostream& os, const Network& net);
Network load_network(std::istream& is);
void save_network_file(const std::filesystem::path& path, const Network& net);
Network load_network_file(const std::filesystem::path& path);

/// True when two networks have identical structure and bitwise-equal
/// parameters.
bool networks_identical(const Network& a, const Network& b);

}  // namespace trafficaug
