#include "trafficaug/gan.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "trafficaug/binio.hpp"

namespace trafficaug {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

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

Matrix draw_rows(const Matrix& data, Rng& rng, Index n) {
  Matrix out(n, data.cols());
  for (Index r = 0; r < n; ++r)
    out.row(r) = data.row(static_cast<Index>(
        rng.uniform_below(static_cast<std::uint64_t>(data.rows()))));
  return out;
}

}  // namespace

void TrainHistory::to_csv(std::ostream& os) const {
  os << "step,d_loss,g_loss\n";
  std::string line;
  for (std::size_t i = 0; i < d_loss.size(); ++i) {
    line = std::to_string(i + 1);
    line.push_back(',');
    append_double(line, d_loss[i]);
    line.push_back(',');
    append_double(line, i < g_loss.size() ? g_loss[i] : 0.0);
    line.push_back('\n');
    os << line;
  }
}

GanModel make_gan(const GanConfig& config, int data_dim) {
  if (data_dim <= 0) throw DataError("gan: data_dim must be positive");
  if (config.noise_dim <= 0) throw DataError("gan: noise_dim must be positive");

  Rng rng(config.seed);
  Rng g_rng = rng.fork("gan.init.generator");
  Rng d_rng = rng.fork("gan.init.discriminator");

  GanModel model;
  model.noise_dim = config.noise_dim;
  model.data_dim = data_dim;
  model.generator = Network::random(
      mlp_specs(config.noise_dim, config.g_hidden, data_dim,
                Activation::LeakyReLU, Activation::Sigmoid, config.leaky_slope, 0.0),
      g_rng, config.weight_stddev);
  model.discriminator = Network::random(
      mlp_specs(data_dim, config.d_hidden, 1, Activation::LeakyReLU,
                Activation::Linear, config.leaky_slope, config.dropout),
      d_rng, config.weight_stddev);
  return model;
}

namespace {

/// Generator loss and its gradient with respect to the discriminator logits
/// on fake rows. Gradients are means, matching loss_value_and_grad.
std::pair<double, Matrix> generator_loss(GanLoss variant, const Matrix& logits) {
  const auto m = static_cast<double>(logits.size());
  const Matrix sig = sigmoid(logits);
  double value = 0.0;
  Matrix grad(logits.rows(), logits.cols());
  switch (variant) {
    case GanLoss::NonSaturating:
      // mean softplus(-z); pushing z up means D is being fooled.
      for (Index r = 0; r < logits.rows(); ++r)
        for (Index c = 0; c < logits.cols(); ++c)
          value += softplus(-logits(r, c));
      value /= m;
      grad = (sig.array() - 1.0).matrix() / m;
      return {value, grad};
    case GanLoss::MinimaxEq1:
      // mean log(1 - sigmoid(z)) == -mean softplus(z).
      for (Index r = 0; r < logits.rows(); ++r)
        for (Index c = 0; c < logits.cols(); ++c)
          value -= softplus(logits(r, c));
      value /= m;
      grad = -sig / m;
      return {value, grad};
  }
  throw Error("unreachable gan loss");
}

}  // namespace

GanModel train_gan(const Matrix& real_rows, const GanConfig& config,
                   TrainHistory* history) {
  if (real_rows.rows() == 0) throw DataError("gan: no training rows");
  if (config.data_dim != 0 && config.data_dim != real_rows.cols())
    throw DataError("gan: config data_dim " + std::to_string(config.data_dim) +
                    " does not match data width " + std::to_string(real_rows.cols()));
  if (config.steps < 0) throw DataError("gan: negative step count");
  if (config.batch_size <= 0) throw DataError("gan: batch_size must be positive");

  GanModel model = make_gan(config, static_cast<int>(real_rows.cols()));
  Rng root(config.seed);
  Rng data_rng = root.fork("gan.data");
  Rng noise_rng = root.fork("gan.noise");
  Rng dropout_rng = root.fork("gan.dropout");

  AdamState g_opt(model.generator, {.lr = config.g_lr});
  AdamState d_opt(model.discriminator, {.lr = config.d_lr});

  const Index m = config.batch_size;
  const Matrix d_targets = vcat(Matrix::Ones(m, 1), Matrix::Zero(m, 1));

  for (int step = 1; step <= config.steps; ++step) {
    // Discriminator step: real rows labelled 1, fakes labelled 0, one pass.
    const Matrix real = draw_rows(real_rows, data_rng, m);
    const Matrix fake = model.generator.forward_eval(draw_noise(noise_rng, m, model.noise_dim));
    ForwardCache d_cache;
    const Matrix d_logits =
        model.discriminator.forward_train(vcat(real, fake), dropout_rng, d_cache);
    const LossResult d_loss = loss_value_and_grad(
        LossKind::SigmoidCrossEntropyWithLogits, d_logits, d_targets);
    d_opt.step(model.discriminator,
               model.discriminator.backward(d_cache, d_loss.grad).grads);

    // Generator step: fresh noise, D frozen (and run without dropout so the
    // generator sees the deterministic discriminator).
    ForwardCache g_cache;
    const Matrix fake2 = model.generator.forward_cached(
        draw_noise(noise_rng, m, model.noise_dim), g_cache);
    ForwardCache d_cache2;
    const Matrix g_logits = model.discriminator.forward_cached(fake2, d_cache2);
    const auto [g_value, g_grad] = generator_loss(config.loss_variant, g_logits);
    const BackwardResult through_d = model.discriminator.backward(d_cache2, g_grad);
    g_opt.step(model.generator,
               model.generator.backward(g_cache, through_d.input_grad).grads);

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

Matrix sample(const GanModel& model, Index n, std::uint64_t seed) {
  if (!model.trained) throw DataError("gan: sampling from an untrained model");
  if (n < 0) throw DataError("gan: negative sample count");
  Rng rng(seed);
  return model.generator.forward_eval(draw_noise(rng, n, model.noise_dim));
}

double optimal_discriminator_value(double p_data, double p_g) {
  if (p_data < 0.0 || p_g < 0.0)
    throw DataError("optimal_discriminator_value: densities must be non-negative");
  if (p_data + p_g == 0.0)
    throw DataError("optimal_discriminator_value: both densities are zero");
  return p_data / (p_data + p_g);
}

GanAugmentResult augment_with_gan(const LabeledDataset& ds, const BalancePlan& plan,
                                  const GanConfig& config) {
  if (plan.deficits.size() != static_cast<std::size_t>(ds.num_classes()))
    throw DataError("gan augment: plan does not match dataset class count");

  GanAugmentResult result;
  Matrix pbm(0, ds.dim());
  std::vector<int> labels;
  const Rng root(config.seed);

  for (int c = 0; c < ds.num_classes(); ++c) {
    const std::int64_t deficit = plan.deficits[static_cast<std::size_t>(c)];
    if (deficit == 0) continue;
    const std::vector<Index> rows = rows_of_class(ds, c);
    if (rows.empty())
      throw DataError("gan augment: class '" +
                      ds.class_names[static_cast<std::size_t>(c)] +
                      "' has a deficit but no rows to learn from");

    Matrix cls(static_cast<Index>(rows.size()), ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i)
      cls.row(static_cast<Index>(i)) = ds.pbm.row(rows[i]);

    GanConfig class_config = config;
    class_config.seed = root.fork("gan.train.class." + std::to_string(c)).seed();
    TrainHistory history;
    GanModel model = train_gan(cls, class_config, &history);

    const Matrix generated =
        sample(model, static_cast<Index>(deficit),
               root.fork("gan.sample.class." + std::to_string(c)).seed());
    pbm = pbm.rows() == 0 ? generated : vcat(pbm, generated);
    labels.insert(labels.end(), static_cast<std::size_t>(deficit), c);

    result.trained_labels.push_back(c);
    result.models.push_back(std::move(model));
    result.histories.push_back(std::move(history));
  }

  std::vector<Provenance> provenance(labels.size(), Provenance::Synthetic);
  result.synthetic = make_dataset(std::move(pbm), std::move(labels),
                                  ds.class_names, std::move(provenance));
  return result;
}

namespace {

constexpr std::uint32_t kGanMagic = 0x54414731;  // "TAG1"
constexpr std::uint32_t kGanVersion = 1;

}  // namespace

void save_gan(std::ostream& os, const GanModel& model) {
  write_u32_le(os, kGanMagic);
  write_u32_le(os, kGanVersion);
  write_u32_le(os, static_cast<std::uint32_t>(model.noise_dim));
  write_u32_le(os, static_cast<std::uint32_t>(model.data_dim));
  write_u32_le(os, model.trained ? 1 : 0);
  save_network(os, model.generator);
  save_network(os, model.discriminator);
}

GanModel load_gan(std::istream& is) {
  if (read_u32_le(is) != kGanMagic)
    throw ParseError("not a GAN checkpoint (bad magic)", 0);
  const std::uint32_t version = read_u32_le(is);
  if (version != kGanVersion)
    throw ParseError("unsupported GAN checkpoint version " + std::to_string(version), 4);

  GanModel model;
  model.noise_dim = static_cast<int>(read_u32_le(is));
  model.data_dim = static_cast<int>(read_u32_le(is));
  model.trained = read_u32_le(is) != 0;
  model.generator = load_network(is);
  model.discriminator = load_network(is);
  if (model.generator.input_dim() != model.noise_dim ||
      model.generator.output_dim() != model.data_dim ||
      model.discriminator.input_dim() != model.data_dim)
    throw ParseError("GAN checkpoint dimensions are inconsistent", -1);
  return model;
}

void save_gan_file(const std::filesystem::path& path, const GanModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  save_gan(out, model);
}

GanModel load_gan_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  return load_gan(in);
}

}  // namespace trafficaug
