#include "trafficaug/cgan.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "testutil.hpp"

using namespace trafficaug;

namespace {

std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("class" + std::to_string(i));
  return out;
}

CganConfig small_config() {
  CganConfig cfg;
  cfg.noise_dim = 6;
  cfg.g_hidden = {16};
  cfg.d_hidden = {16};
  cfg.steps = 40;
  cfg.batch_size = 8;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("conditional widths include the label block") {
  CganConfig cfg;
  const CganModel wide = make_cgan(cfg, 200, names(15));
  // The generator consumes noise plus a 15-wide one-hot: 100 + 15 = 115.
  CHECK(wide.generator.input_dim() == 115);
  CHECK(wide.generator.output_dim() == 200);
  CHECK(wide.label_dim == 15);
  CHECK(wide.noise_dim == 100);

  const CganModel d = make_cgan(cfg, 1480, names(10));
  // The discriminator consumes data plus the one-hot: 1480 + 10 = 1490.
  CHECK(d.discriminator.input_dim() == 1490);
  CHECK(d.discriminator.output_dim() == 1);
  CHECK(d.generator.layers().back().activation == Activation::Sigmoid);
  CHECK(d.class_names.size() == 10);
  CHECK_FALSE(d.trained);
}

TEST_CASE("an untrained conditional model refuses to generate") {
  const CganModel m = make_cgan(small_config(), 4, names(3));
  CHECK_THROWS_AS(generate_conditional(m, 0, 2, 0), DataError);
}

TEST_CASE("training on a labeled dataset produces usable conditional samples") {
  const LabeledDataset ds =
      testutil::template_dataset(3, 5, {20, 20, 20}, 0.03, 7);
  const CganConfig cfg = small_config();

  TrainHistory hist;
  const CganModel m = train_cgan(ds, cfg, &hist);
  CHECK(m.trained);
  CHECK(m.label_dim == 3);
  CHECK(m.data_dim == 5);
  CHECK(m.class_names == ds.class_names);
  CHECK(hist.d_loss.size() == 40);
  CHECK(hist.g_loss.size() == 40);
  for (double v : hist.d_loss) CHECK(std::isfinite(v));
  for (double v : hist.g_loss) CHECK(std::isfinite(v));

  SUBCASE("generation is deterministic per seed and label") {
    const Matrix a = generate_conditional(m, 1, 8, 99);
    const Matrix b = generate_conditional(m, 1, 8, 99);
    CHECK(a == b);
    CHECK(a.rows() == 8);
    CHECK(a.cols() == 5);
    CHECK(a.minCoeff() >= 0.0);
    CHECK(a.maxCoeff() <= 1.0);
    const Matrix c = generate_conditional(m, 2, 8, 99);
    CHECK(a != c);  // the label block must influence the output
    CHECK(generate_conditional(m, 1, 0, 99).rows() == 0);
  }

  SUBCASE("label bounds are enforced") {
    CHECK_THROWS_AS(generate_conditional(m, 3, 2, 0), DataError);
    CHECK_THROWS_AS(generate_conditional(m, -1, 2, 0), DataError);
  }

  SUBCASE("same seed retrains to identical weights") {
    const CganModel m2 = train_cgan(ds, cfg, nullptr);
    CHECK(networks_identical(m.generator, m2.generator));
    CHECK(networks_identical(m.discriminator, m2.discriminator));
  }
}

TEST_CASE("one generator step does not increase its loss on the same batch") {
  // Replicates the trainer's generator update through the public pieces: the
  // discriminator is frozen and dropout-free during the generator step, so a
  // single small optimizer step must not make the generator loss worse on
  // the very (noise, label) batch the gradient came from.
  CganConfig cfg = small_config();
  CganModel m = make_cgan(cfg, 5, names(3));
  const Index batch = 16;

  Rng rng(4242);
  Matrix z(batch, cfg.noise_dim);
  for (Index r = 0; r < z.rows(); ++r)
    for (Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (auto& l : labels) l = static_cast<int>(rng.uniform_below(3));
  const Matrix onehot = one_hot(labels, 3);
  const Matrix g_in = hcat(z, onehot);

  const auto g_loss_now = [&]() {
    const Matrix fake = m.generator.forward_eval(g_in);
    const Matrix logits = m.discriminator.forward_eval(hcat(fake, onehot));
    double v = 0.0;
    for (Index r = 0; r < logits.rows(); ++r) v += softplus(-logits(r, 0));
    return v / static_cast<double>(logits.size());
  };

  const double before = g_loss_now();

  // One generator update exactly as the trainer performs it.
  ForwardCache g_cache;
  const Matrix fake = m.generator.forward_cached(g_in, g_cache);
  ForwardCache d_cache;
  const Matrix logits = m.discriminator.forward_cached(hcat(fake, onehot), d_cache);
  const Matrix g_grad =
      (sigmoid(logits).array() - 1.0).matrix() / static_cast<double>(logits.size());
  const BackwardResult through_d = m.discriminator.backward(d_cache, g_grad);
  const Matrix data_grad = through_d.input_grad.leftCols(5);
  AdamState g_opt(m.generator, AdamConfig{.lr = cfg.g_lr});
  g_opt.step(m.generator, m.generator.backward(g_cache, data_grad).grads);

  const double after = g_loss_now();
  CHECK(after <= before + 1e-12);
}

TEST_CASE("balancing generates exactly the missing rows per class") {
  const LabeledDataset ds =
      testutil::template_dataset(3, 4, {18, 7, 12}, 0.04, 21);
  const BalancePlan plan = make_balance_plan(ds, 18);

  const CganConfig cfg = small_config();
  const CganModel m = train_cgan(ds, cfg, nullptr);

  const LabeledDataset synth = augment_to_balance(m, plan, 31);
  CHECK(rows_of_class(synth, 0).empty());
  CHECK(rows_of_class(synth, 1).size() == 11);
  CHECK(rows_of_class(synth, 2).size() == 6);
  CHECK(synth.class_names == ds.class_names);
  for (auto p : synth.provenance) CHECK(p == Provenance::Synthetic);

  const LabeledDataset merged = merge(ds, synth);
  for (int c = 0; c < 3; ++c)
    CHECK(rows_of_class(merged, c).size() == 18);

  const LabeledDataset synth2 = augment_to_balance(m, plan, 31);
  CHECK(synth2.pbm == synth.pbm);

  SUBCASE("plan width must match the model's class table") {
    BalancePlan bad;
    bad.target_per_class = {5, 5};
    bad.deficits = {1, 1};
    CHECK_THROWS_AS(augment_to_balance(m, bad, 0), DataError);
  }
  SUBCASE("an untrained model is rejected") {
    const CganModel fresh = make_cgan(cfg, 4, names(3));
    CHECK_THROWS_AS(augment_to_balance(fresh, plan, 0), DataError);
  }
}

TEST_CASE("conditional checkpoints round-trip with the class table") {
  const LabeledDataset ds = testutil::template_dataset(2, 3, {12, 12}, 0.02, 5);
  CganConfig cfg = small_config();
  cfg.steps = 6;
  const CganModel m = train_cgan(ds, cfg, nullptr);

  const auto dir = testutil::scratch_dir("cgan_ckpt");
  const auto path = dir / "cgan.ckpt";
  save_cgan_file(path, m);
  const CganModel back = load_cgan_file(path);
  CHECK(back.trained);
  CHECK(back.label_dim == 2);
  CHECK(back.noise_dim == 6);
  CHECK(back.data_dim == 3);
  CHECK(back.class_names == ds.class_names);
  CHECK(networks_identical(back.generator, m.generator));
  CHECK(networks_identical(back.discriminator, m.discriminator));
  CHECK(generate_conditional(back, 0, 4, 2) == generate_conditional(m, 0, 4, 2));
  std::filesystem::remove_all(dir);
}
