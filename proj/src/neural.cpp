#include "trafficaug/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "trafficaug/binio.hpp"

namespace trafficaug {

Matrix sigmoid(const Matrix& z) {
  // Branch on sign so exp never overflows.
  return z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    Eigen::RowVectorXd e = (z.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

Matrix apply_activation(const Matrix& z, Activation act, double leaky_slope) {
  switch (act) {
    case Activation::Linear:
      return z;
    case Activation::ReLU:
      return z.cwiseMax(0.0);
    case Activation::LeakyReLU:
      return z.cwiseMax(0.0) + leaky_slope * z.cwiseMin(0.0);
    case Activation::Sigmoid:
      return sigmoid(z);
    case Activation::Softmax:
      return softmax_rows(z);
  }
  throw Error("unreachable activation");
}

namespace {

/// d(loss)/d(preact) from d(loss)/d(postact).
Matrix activation_backward(const Matrix& da, const DenseLayer& layer,
                           const LayerCache& cache) {
  switch (layer.activation) {
    case Activation::Linear:
      return da;
    case Activation::ReLU:
      return da.cwiseProduct(
          cache.preact.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    case Activation::LeakyReLU: {
      const double slope = layer.leaky_slope;
      return da.cwiseProduct(cache.preact.unaryExpr(
          [slope](double v) { return v > 0.0 ? 1.0 : slope; }));
    }
    case Activation::Sigmoid:
      return da.cwiseProduct(
          cache.postact.cwiseProduct(Matrix::Ones(cache.postact.rows(),
                                                  cache.postact.cols()) -
                                     cache.postact));
    case Activation::Softmax: {
      // Full Jacobian product, row by row:
      // dz_i = p_i * (da_i - sum_j da_j p_j).
      Matrix dz(da.rows(), da.cols());
      for (Index r = 0; r < da.rows(); ++r) {
        const double dot = da.row(r).dot(cache.postact.row(r));
        dz.row(r) = cache.postact.row(r).cwiseProduct(
            (da.row(r).array() - dot).matrix());
      }
      return dz;
    }
  }
  throw Error("unreachable activation");
}

}  // namespace

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DataError("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    if (l.W.rows() != l.b.size())
      throw DataError("layer " + std::to_string(i) + ": bias size " +
                      std::to_string(l.b.size()) + " does not match " +
                      std::to_string(l.W.rows()) + " outputs");
    if (l.dropout < 0.0 || l.dropout >= 1.0)
      throw DataError("layer " + std::to_string(i) + ": dropout must lie in [0, 1)");
    if (i > 0 && l.in_dim() != layers_[i - 1].out_dim())
      throw DataError("layer " + std::to_string(i) + ": input width " +
                      std::to_string(l.in_dim()) + " does not chain from " +
                      std::to_string(layers_[i - 1].out_dim()));
  }
}

Network Network::random(std::span<const LayerSpec> specs, Rng& rng,
                        double weight_stddev) {
  std::vector<DenseLayer> layers;
  layers.reserve(specs.size());
  for (const LayerSpec& s : specs) {
    DenseLayer l;
    l.W.resize(s.out, s.in);
    for (Index r = 0; r < s.out; ++r)
      for (Index c = 0; c < s.in; ++c) l.W(r, c) = rng.normal(0.0, weight_stddev);
    l.b = Vector::Zero(s.out);
    l.activation = s.activation;
    l.leaky_slope = s.leaky_slope;
    l.dropout = s.dropout;
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

Index Network::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

Index Network::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

Matrix Network::run(const Matrix& batch, Rng* rng, ForwardCache* cache) const {
  if (layers_.empty()) throw DataError("forward through an empty network");
  if (batch.cols() != input_dim())
    throw DataError("forward: batch width " + std::to_string(batch.cols()) +
                    " does not match input dim " + std::to_string(input_dim()));
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(layers_.size());
  }

  Matrix a = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    Matrix z = a * l.W.transpose();
    z.rowwise() += l.b.transpose();
    Matrix post = apply_activation(z, l.activation, l.leaky_slope);

    Matrix mask;
    if (rng && l.dropout > 0.0) {
      const double keep = 1.0 - l.dropout;
      mask.resize(post.rows(), post.cols());
      for (Index r = 0; r < mask.rows(); ++r)
        for (Index c = 0; c < mask.cols(); ++c)
          mask(r, c) = rng->uniform01() < keep ? 1.0 / keep : 0.0;
      post = post.cwiseProduct(mask);
    }

    if (cache) {
      LayerCache& lc = cache->layers[i];
      lc.input = std::move(a);
      lc.preact = std::move(z);
      if (mask.size() > 0) {
        lc.mask = std::move(mask);
        // Recompute the pre-dropout activation cheaply for backward use.
        lc.postact = apply_activation(lc.preact, l.activation, l.leaky_slope);
      } else {
        lc.postact = post;
      }
    }
    a = std::move(post);
  }
  if (cache) cache->output = a;
  return a;
}

Matrix Network::forward_eval(const Matrix& batch) const {
  return run(batch, nullptr, nullptr);
}

Matrix Network::forward_cached(const Matrix& batch, ForwardCache& cache) const {
  return run(batch, nullptr, &cache);
}

Matrix Network::forward_train(const Matrix& batch, Rng& rng,
                              ForwardCache& cache) const {
  return run(batch, &rng, &cache);
}

BackwardResult Network::backward(const ForwardCache& cache,
                                 const Matrix& output_grad) const {
  if (cache.layers.size() != layers_.size())
    throw DataError("backward: cache does not match network depth");

  BackwardResult result;
  result.grads.dW.resize(layers_.size());
  result.grads.db.resize(layers_.size());

  Matrix da = output_grad;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const DenseLayer& l = layers_[i];
    const LayerCache& lc = cache.layers[i];
    if (lc.mask.size() > 0) da = da.cwiseProduct(lc.mask);
    const Matrix dz = activation_backward(da, l, lc);
    result.grads.dW[i] = dz.transpose() * lc.input;
    result.grads.db[i] = dz.colwise().sum().transpose();
    da = dz * l.W;
  }
  result.input_grad = std::move(da);
  return result;
}

BackwardResult Network::backward_softmax_xent(const ForwardCache& cache,
                                              const Matrix& targets) const {
  if (layers_.empty() || layers_.back().activation != Activation::Softmax)
    throw DataError("fused softmax cross-entropy backward needs a Softmax head");
  if (layers_.back().dropout != 0.0)
    throw DataError("fused softmax backward does not support head dropout");
  if (cache.output.rows() != targets.rows() || cache.output.cols() != targets.cols())
    throw DataError("fused softmax backward: target shape mismatch");

  BackwardResult result;
  result.grads.dW.resize(layers_.size());
  result.grads.db.resize(layers_.size());

  const auto batch = static_cast<double>(targets.rows());
  Matrix dz = (cache.output - targets) / batch;

  for (std::size_t i = layers_.size(); i-- > 0;) {
    const DenseLayer& l = layers_[i];
    const LayerCache& lc = cache.layers[i];
    if (i + 1 < layers_.size()) {
      Matrix da = dz * layers_[i + 1].W;
      if (lc.mask.size() > 0) da = da.cwiseProduct(lc.mask);
      dz = activation_backward(da, l, lc);
    }
    result.grads.dW[i] = dz.transpose() * lc.input;
    result.grads.db[i] = dz.colwise().sum().transpose();
  }
  result.input_grad = dz * layers_.front().W;
  return result;
}

namespace {

LossResult sigmoid_ce_with_logits(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw DataError("loss: prediction/target shape mismatch");
  if (!((targets.array() == 0.0) || (targets.array() == 1.0)).all())
    throw DataError("loss: binary targets must be exactly 0 or 1");

  const auto n = static_cast<double>(logits.size());
  double sum = 0.0;
  for (Index r = 0; r < logits.rows(); ++r)
    for (Index c = 0; c < logits.cols(); ++c)
      sum += softplus(logits(r, c)) - logits(r, c) * targets(r, c);

  LossResult res;
  res.value = sum / n;
  res.grad = (sigmoid(logits) - targets) / n;
  return res;
}

constexpr double kProbFloor = 1e-12;

LossResult categorical_ce(const Matrix& probs, const Matrix& targets) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
    throw DataError("loss: prediction/target shape mismatch");
  if ((targets.array() < 0.0).any())
    throw DataError("loss: categorical targets must be non-negative");
  for (Index r = 0; r < targets.rows(); ++r)
    if (std::abs(targets.row(r).sum() - 1.0) > 1e-6)
      throw DataError("loss: categorical target row " + std::to_string(r) +
                      " does not sum to 1");

  const auto batch = static_cast<double>(probs.rows());
  double sum = 0.0;
  LossResult res;
  res.grad = Matrix::Zero(probs.rows(), probs.cols());
  for (Index r = 0; r < probs.rows(); ++r) {
    for (Index c = 0; c < probs.cols(); ++c) {
      const double t = targets(r, c);
      if (t == 0.0) continue;
      const double p = std::min(1.0, std::max(kProbFloor, probs(r, c)));
      sum -= t * std::log(p);
      // Inside the clamp the derivative is -t/p; outside it is zero.
      if (probs(r, c) > kProbFloor && probs(r, c) <= 1.0)
        res.grad(r, c) = -t / p / batch;
    }
  }
  res.value = sum / batch;
  return res;
}

}  // namespace

LossResult loss_value_and_grad(LossKind kind, const Matrix& predictions,
                               const Matrix& targets) {
  switch (kind) {
    case LossKind::SigmoidCrossEntropyWithLogits:
      return sigmoid_ce_with_logits(predictions, targets);
    case LossKind::CategoricalCrossEntropy:
      return categorical_ce(predictions, targets);
  }
  throw Error("unreachable loss kind");
}

AdamState::AdamState(const Network& net, AdamConfig config) : config_(config) {
  for (const DenseLayer& l : net.layers()) {
    mW_.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    vW_.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    mb_.push_back(Vector::Zero(l.b.size()));
    vb_.push_back(Vector::Zero(l.b.size()));
  }
}

void AdamState::step(Network& net, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.dW.size() != layers.size() || grads.db.size() != layers.size() ||
      mW_.size() != layers.size())
    throw DataError("adam: gradient/state shape mismatch");

  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));

  for (std::size_t i = 0; i < layers.size(); ++i) {
    mW_[i] = b1 * mW_[i] + (1.0 - b1) * grads.dW[i];
    vW_[i] = b2 * vW_[i] + (1.0 - b2) * grads.dW[i].cwiseProduct(grads.dW[i]);
    mb_[i] = b1 * mb_[i] + (1.0 - b1) * grads.db[i];
    vb_[i] = b2 * vb_[i] + (1.0 - b2) * grads.db[i].cwiseProduct(grads.db[i]);

    const Matrix mW_hat = mW_[i] / bias1;
    const Matrix vW_hat = vW_[i] / bias2;
    const Vector mb_hat = mb_[i] / bias1;
    const Vector vb_hat = vb_[i] / bias2;

    layers[i].W -=
        config_.lr * (mW_hat.array() / (vW_hat.array().sqrt() + config_.epsilon)).matrix();
    layers[i].b -=
        config_.lr * (mb_hat.array() / (vb_hat.array().sqrt() + config_.epsilon)).matrix();
  }
}

namespace {

constexpr std::uint32_t kNetMagic = 0x54414E31;  // "TAN1"
constexpr std::uint32_t kNetVersion = 1;

}  // namespace

void save_network(std::ostream& os, const Network& net) {
  write_u32_le(os, kNetMagic);
  write_u32_le(os, kNetVersion);
  write_u32_le(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const DenseLayer& l : net.layers()) {
    write_u32_le(os, static_cast<std::uint32_t>(l.in_dim()));
    write_u32_le(os, static_cast<std::uint32_t>(l.out_dim()));
    write_u32_le(os, static_cast<std::uint32_t>(l.activation));
    write_f64_le(os, l.leaky_slope);
    write_f64_le(os, l.dropout);
  }
  for (const DenseLayer& l : net.layers()) {
    for (Index r = 0; r < l.W.rows(); ++r)
      for (Index c = 0; c < l.W.cols(); ++c) write_f64_le(os, l.W(r, c));
    for (Index i = 0; i < l.b.size(); ++i) write_f64_le(os, l.b[i]);
  }
  if (!os) throw DataError("network checkpoint write failed");
}

Network load_network(std::istream& is) {
  if (read_u32_le(is) != kNetMagic)
    throw ParseError("not a network checkpoint (bad magic)", 0);
  const std::uint32_t version = read_u32_le(is);
  if (version != kNetVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);

  const std::uint32_t n_layers = read_u32_le(is);
  std::vector<DenseLayer> layers(n_layers);
  for (DenseLayer& l : layers) {
    const std::uint32_t in = read_u32_le(is);
    const std::uint32_t out = read_u32_le(is);
    const std::uint32_t act = read_u32_le(is);
    if (act > static_cast<std::uint32_t>(Activation::Softmax))
      throw ParseError("checkpoint names an unknown activation", -1);
    l.W.resize(out, in);
    l.b.resize(out);
    l.activation = static_cast<Activation>(act);
    l.leaky_slope = read_f64_le(is);
    l.dropout = read_f64_le(is);
  }
  for (DenseLayer& l : layers) {
    for (Index r = 0; r < l.W.rows(); ++r)
      for (Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = read_f64_le(is);
    for (Index i = 0; i < l.b.size(); ++i) l.b[i] = read_f64_le(is);
  }
  return Network(std::move(layers));
}

void save_network_file(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  save_network(out, net);
}

Network load_network_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return load_network(in);
}

bool networks_identical(const Network& a, const Network& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    const DenseLayer& la = a.layers()[i];
    const DenseLayer& lb = b.layers()[i];
    if (la.activation != lb.activation || la.leaky_slope != lb.leaky_slope ||
        la.dropout != lb.dropout)
      return false;
    if (la.W.rows() != lb.W.rows() || la.W.cols() != lb.W.cols()) return false;
    if (std::memcmp(la.W.data(), lb.W.data(),
                    sizeof(double) * static_cast<std::size_t>(la.W.size())) != 0)
      return false;
    if (la.b.size() != lb.b.size()) return false;
    if (std::memcmp(la.b.data(), lb.b.data(),
                    sizeof(double) * static_cast<std::size_t>(la.b.size())) != 0)
      return false;
  }
  return true;
}

}  // namespace trafficaug
