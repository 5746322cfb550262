#include "trafficaug/cgan.hpp"

#include <cmath>
#include <fstream>

#include "trafficaug/binio.hpp"

namespace trafficaug {

namespace {

std::vector<LayerSpec> mlp_specs(int in, const std::vector<int>& hidden, int out,
                                 Activation hidden_act, Activation out_act,
                                 double leaky_slope, double hidden_dropout) {
  std::vector<LayerSpec> specs;
  int prev = in;
  for (int width : hidden) {
    specs.push_back({prev, width, hidden_act, hidden_dropout, leaky_slope});
    prev = width;
  }
  specs.push_back({prev, out, out_act, 0.0, leaky_slope});
  return specs;
}

Matrix draw_noise(Rng& rng, Index n, int noise_dim) {
  Matrix z(n, noise_dim);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < noise_dim; ++c) z(r, c) = rng.normal();
  return z;
}

/// Generator loss value/gradient on fake logits; same conventions as the
/// unconditional trainer.
std::pair<double, Matrix> generator_loss(GanLoss variant, const Matrix& logits) {
  const auto m = static_cast<double>(logits.size());
  const Matrix sig = sigmoid(logits);
  double value = 0.0;
  switch (variant) {
    case GanLoss::NonSaturating:
      for (Index r = 0; r < logits.rows(); ++r) value += softplus(-logits(r, 0));
      return {value / m, (sig.array() - 1.0).matrix() / m};
    case GanLoss::MinimaxEq1:
      for (Index r = 0; r < logits.rows(); ++r) value -= softplus(logits(r, 0));
      return {value / m, -sig / m};
  }
  throw Error("unreachable gan loss");
}

}  // namespace

CganModel make_cgan(const CganConfig& config, int data_dim,
                    std::vector<std::string> class_names) {
  if (data_dim <= 0) throw DataError("cgan: data_dim must be positive");
  if (config.noise_dim <= 0) throw DataError("cgan: noise_dim must be positive");
  if (class_names.empty()) throw DataError("cgan: class table is empty");

  const int label_dim = static_cast<int>(class_names.size());
  Rng rng(config.seed);
  Rng g_rng = rng.fork("cgan.init.generator");
  Rng d_rng = rng.fork("cgan.init.discriminator");

  CganModel model;
  model.noise_dim = config.noise_dim;
  model.label_dim = label_dim;
  model.data_dim = data_dim;
  model.class_names = std::move(class_names);
  model.generator = Network::random(
      mlp_specs(config.noise_dim + label_dim, config.g_hidden, data_dim,
                Activation::LeakyReLU, Activation::Sigmoid, config.leaky_slope, 0.0),
      g_rng, config.weight_stddev);
  model.discriminator = Network::random(
      mlp_specs(data_dim + label_dim, config.d_hidden, 1, Activation::LeakyReLU,
                Activation::Linear, config.leaky_slope, config.dropout),
      d_rng, config.weight_stddev);
  return model;
}

CganModel train_cgan(const LabeledDataset& ds, const CganConfig& config,
                     TrainHistory* history) {
  if (ds.rows() == 0) throw DataError("cgan: no training rows");
  if (config.data_dim != 0 && config.data_dim != ds.dim())
    throw DataError("cgan: config data_dim " + std::to_string(config.data_dim) +
                    " does not match data width " + std::to_string(ds.dim()));
  if (config.steps < 0) throw DataError("cgan: negative step count");
  if (config.batch_size <= 0) throw DataError("cgan: batch_size must be positive");

  CganModel model = make_cgan(config, static_cast<int>(ds.dim()), ds.class_names);
  const int label_dim = model.label_dim;

  Rng root(config.seed);
  Rng data_rng = root.fork("cgan.data");
  Rng noise_rng = root.fork("cgan.noise");
  Rng label_rng = root.fork("cgan.labels");
  Rng dropout_rng = root.fork("cgan.dropout");

  AdamState g_opt(model.generator, {.lr = config.g_lr});
  AdamState d_opt(model.discriminator, {.lr = config.d_lr});

  const Index m = config.batch_size;
  const Matrix d_targets = vcat(Matrix::Ones(m, 1), Matrix::Zero(m, 1));

  for (int step = 1; step <= config.steps; ++step) {
    // Real batch with its own labels.
    Matrix real(m, ds.dim());
    std::vector<int> real_labels(static_cast<std::size_t>(m));
    for (Index r = 0; r < m; ++r) {
      const auto pick = static_cast<Index>(
          data_rng.uniform_below(static_cast<std::uint64_t>(ds.rows())));
      real.row(r) = ds.pbm.row(pick);
      real_labels[static_cast<std::size_t>(r)] =
          ds.labels[static_cast<std::size_t>(pick)];
    }
    const Matrix real_onehot = one_hot(real_labels, label_dim);

    // Fake batch: uniformly drawn condition labels. The same one-hot block
    // goes into the generator and, appended to the generated rows, into the
    // discriminator.
    std::vector<int> fake_labels(static_cast<std::size_t>(m));
    for (auto& l : fake_labels)
      l = static_cast<int>(label_rng.uniform_below(static_cast<std::uint64_t>(label_dim)));
    const Matrix fake_onehot = one_hot(fake_labels, label_dim);
    const Matrix fake = model.generator.forward_eval(
        hcat(draw_noise(noise_rng, m, model.noise_dim), fake_onehot));

    // Discriminator step on [real|labels] (target 1) + [fake|labels] (target 0).
    ForwardCache d_cache;
    const Matrix d_logits = model.discriminator.forward_train(
        vcat(hcat(real, real_onehot), hcat(fake, fake_onehot)), dropout_rng, d_cache);
    const LossResult d_loss = loss_value_and_grad(
        LossKind::SigmoidCrossEntropyWithLogits, d_logits, d_targets);
    d_opt.step(model.discriminator,
               model.discriminator.backward(d_cache, d_loss.grad).grads);

    // Generator step: fresh noise, same labels, D frozen and dropout-free.
    ForwardCache g_cache;
    const Matrix fake2 = model.generator.forward_cached(
        hcat(draw_noise(noise_rng, m, model.noise_dim), fake_onehot), g_cache);
    ForwardCache d_cache2;
    const Matrix g_logits =
        model.discriminator.forward_cached(hcat(fake2, fake_onehot), d_cache2);
    const auto [g_value, g_grad] = generator_loss(config.loss_variant, g_logits);
    const BackwardResult through_d = model.discriminator.backward(d_cache2, g_grad);
    // Only the data block of D's input gradient reaches the generator; the
    // label block is a constant.
    const Matrix data_grad = through_d.input_grad.leftCols(ds.dim());
    g_opt.step(model.generator, model.generator.backward(g_cache, data_grad).grads);

    if (!std::isfinite(d_loss.value))
      throw NumericError("non-finite discriminator loss at step " +
                             std::to_string(step), step);
    if (!std::isfinite(g_value))
      throw NumericError("non-finite generator loss at step " + std::to_string(step),
                         step);
    if (history) {
      history->d_loss.push_back(d_loss.value);
      history->g_loss.push_back(g_value);
    }
  }

  model.trained = true;
  return model;
}

Matrix generate_conditional(const CganModel& model, int label, Index n,
                            std::uint64_t seed) {
  if (!model.trained) throw DataError("cgan: sampling from an untrained model");
  if (label < 0 || label >= model.label_dim)
    throw DataError("cgan: label " + std::to_string(label) + " outside [0, " +
                    std::to_string(model.label_dim) + ")");
  if (n < 0) throw DataError("cgan: negative sample count");

  Rng rng(seed);
  Matrix onehot = Matrix::Zero(n, model.label_dim);
  onehot.col(label).setOnes();
  return model.generator.forward_eval(
      hcat(draw_noise(rng, n, model.noise_dim), onehot));
}

LabeledDataset augment_to_balance(const CganModel& model, const BalancePlan& plan,
                                  std::uint64_t seed) {
  if (!model.trained) throw DataError("cgan: augmenting with an untrained model");
  if (plan.deficits.size() != static_cast<std::size_t>(model.label_dim))
    throw DataError("cgan augment: plan does not match the model's class table");

  const Rng root(seed);
  Matrix pbm(0, model.data_dim);
  std::vector<int> labels;
  for (int c = 0; c < model.label_dim; ++c) {
    const std::int64_t deficit = plan.deficits[static_cast<std::size_t>(c)];
    if (deficit == 0) continue;
    const Matrix rows = generate_conditional(
        model, c, static_cast<Index>(deficit),
        root.fork("cgan.sample.class." + std::to_string(c)).seed());
    pbm = pbm.rows() == 0 ? rows : vcat(pbm, rows);
    labels.insert(labels.end(), static_cast<std::size_t>(deficit), c);
  }

  std::vector<Provenance> provenance(labels.size(), Provenance::Synthetic);
  return make_dataset(std::move(pbm), std::move(labels), model.class_names,
                      std::move(provenance));
}

namespace {

constexpr std::uint32_t kCganMagic = 0x54414331;  // "TAC1"
constexpr std::uint32_t kCganVersion = 1;

}  // namespace

void save_cgan(std::ostream& os, const CganModel& model) {
  write_u32_le(os, kCganMagic);
  write_u32_le(os, kCganVersion);
  write_u32_le(os, static_cast<std::uint32_t>(model.noise_dim));
  write_u32_le(os, static_cast<std::uint32_t>(model.label_dim));
  write_u32_le(os, static_cast<std::uint32_t>(model.data_dim));
  write_u32_le(os, model.trained ? 1 : 0);
  write_u32_le(os, static_cast<std::uint32_t>(model.class_names.size()));
  for (const std::string& name : model.class_names) {
    write_u32_le(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  save_network(os, model.generator);
  save_network(os, model.discriminator);
}

CganModel load_cgan(std::istream& is) {
  if (read_u32_le(is) != kCganMagic)
    throw ParseError("not a conditional GAN checkpoint (bad magic)", 0);
  const std::uint32_t version = read_u32_le(is);
  if (version != kCganVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);

  CganModel model;
  model.noise_dim = static_cast<int>(read_u32_le(is));
  model.label_dim = static_cast<int>(read_u32_le(is));
  model.data_dim = static_cast<int>(read_u32_le(is));
  model.trained = read_u32_le(is) != 0;
  const std::uint32_t n_names = read_u32_le(is);
  if (static_cast<int>(n_names) != model.label_dim)
    throw ParseError("checkpoint class table does not match label_dim", -1);
  for (std::uint32_t i = 0; i < n_names; ++i) {
    const std::uint32_t len = read_u32_le(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(len)))
      throw ParseError("checkpoint stream truncated in class table", -1);
    model.class_names.push_back(std::move(name));
  }
  model.generator = load_network(is);
  model.discriminator = load_network(is);
  if (model.generator.input_dim() != model.noise_dim + model.label_dim ||
      model.generator.output_dim() != model.data_dim ||
      model.discriminator.input_dim() != model.data_dim + model.label_dim)
    throw ParseError("conditional GAN checkpoint dimensions are inconsistent", -1);
  return model;
}

void save_cgan_file(const std::filesystem::path& path, const CganModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  save_cgan(out, model);
}

CganModel load_cgan_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return load_cgan(in);
}

}  // namespace trafficaug
