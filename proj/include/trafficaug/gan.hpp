#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "trafficaug/dataset.hpp"
#include "trafficaug/neural.hpp"
#include "trafficaug/types.hpp"

namespace trafficaug {

/// Generator objective flavour. Both train D the same way; they differ in
/// the sign and saturation behaviour of the generator's own loss.
enum class GanLoss {
  /// G minimizes mean log(1 - D(G(z))), the literal two-player objective.
  /// Gradients vanish while D confidently rejects fakes.
  MinimaxEq1,
  /// G maximizes mean log D(G(z)) instead; same fixed point, useful
  /// gradients early. The default.
  NonSaturating,
};

struct GanConfig {
  int noise_dim = 100;
  /// Width of generated rows. 0 means "take it from the training data".
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

/// Per-step loss record; one entry in each vector per training step.
struct TrainHistory {
  std::vector<double> d_loss;
  std::vector<double> g_loss;

  std::size_t entries() const { return d_loss.size() + g_loss.size(); }
  void to_csv(std::ostream& os) const;  ///< Header step,d_loss,g_loss.
};

struct GanModel {
  Network generator;       ///< noise_dim -> data_dim, Sigmoid output.
  Network discriminator;   ///< data_dim -> 1 raw logit.
  int noise_dim = 0;
  int data_dim = 0;
  bool trained = false;
};

/// Builds the two networks (random init) without training.
GanModel make_gan(const GanConfig& config, int data_dim);

/// Adversarial training on unlabeled rows (values in [0, 1]). Each step
/// updates D once on a concatenated real(1)/fake(0) batch, then G once on a
/// fresh noise batch. Non-finite losses abort with NumericError.
GanModel train_gan(const Matrix& real_rows, const GanConfig& config,
                   TrainHistory* history = nullptr);

/// Draws n rows from the generator. The model must be trained.
Matrix sample(const GanModel& model, Index n, std::uint64_t seed);

/// Discriminator value the inner maximization converges to at a point where
/// the data density is p_data and the generator density is p_g.
double optimal_discriminator_value(double p_data, double p_g);

struct GanAugmentResult {
  LabeledDataset synthetic;          ///< Only the generated rows.
  std::vector<int> trained_labels;   ///< Classes that needed a model.
  std::vector<GanModel> models;      ///< Parallel to trained_labels.
  std::vector<TrainHistory> histories;
};

/// Trains one GAN per class with a positive deficit and samples exactly the
/// deficit from each. Per-class seeds derive from config.seed.
GanAugmentResult augment_with_gan(const LabeledDataset& ds, const BalancePlan& plan,
                                  const GanConfig& config);

void save_gan(std::ostream& os, const GanModel& model);
GanModel load_gan(std::istream& is);
void save_gan_file(const std::filesystem::path& path, const GanModel& model);
GanModel load_gan_file(const std::filesystem::path& path);

}  // namespace trafficaug
