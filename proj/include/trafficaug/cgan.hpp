#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trafficaug/dataset.hpp"
#include "trafficaug/gan.hpp"
#include "trafficaug/neural.hpp"

namespace trafficaug {

/// Conditional GAN configuration. The label width always comes from the
/// training dataset's class table; data_dim of 0 likewise means "from data".
struct CganConfig {
  int noise_dim = 100;
  int data_dim = 0;
  std::vector<int> g_hidden = {256, 512};
  std::vector<int> d_hidden = {512, 256, 128};
  double leaky_slope = 0.2;
  double dropout = 0.3;  ///< Discriminator hidden-layer dropout.
  int steps = 2000;
  int batch_size = 64;
  double g_lr = 2e-4;
  double d_lr = 2e-4;
  double weight_stddev = 0.02;
  std::uint64_t seed = 0;
  GanLoss loss_variant = GanLoss::NonSaturating;
};

/// A class-conditional generator/discriminator pair. The generator consumes
/// [noise | one-hot label] and emits a data row; the discriminator consumes
/// [data row | one-hot label] and emits one realness logit. The label block
/// is appended outside the networks, so a generated row is always paired
/// with the exact label it was conditioned on.
struct CganModel {
  Network generator;      ///< (noise_dim + label_dim) -> data_dim, Sigmoid.
  Network discriminator;  ///< (data_dim + label_dim) -> 1 raw logit.
  int noise_dim = 0;
  int label_dim = 0;
  int data_dim = 0;
  std::vector<std::string> class_names;  ///< Size label_dim.
  bool trained = false;
};

/// Builds the two networks (random init) without training.
CganModel make_cgan(const CganConfig& config, int data_dim,
                    std::vector<std::string> class_names);

/// Adversarial training over labelled rows. Each step samples a real batch
/// with its labels and a uniformly labelled fake batch, updates D once on
/// the concatenated real(1)/fake(0) input, then updates G on fresh noise
/// under the same fake labels. Non-finite losses abort with NumericError.
CganModel train_cgan(const LabeledDataset& ds, const CganConfig& config,
                     TrainHistory* history = nullptr);

/// Draws n rows conditioned on one class. The model must be trained.
Matrix generate_conditional(const CganModel& model, int label, Index n,
                            std::uint64_t seed);

/// Fills every class deficit in the plan from one conditional model.
/// Returns only the generated rows, labelled and marked Synthetic.
LabeledDataset augment_to_balance(const CganModel& model, const BalancePlan& plan,
                                  std::uint64_t seed);

void save_cgan(std::ostream& os, const CganModel& model);
CganModel load_cgan(std::istream& is);
void save_cgan_file(const std::filesystem::path& path, const CganModel& model);
CganModel load_cgan_file(const std::filesystem::path& path);

}  // namespace trafficaug
