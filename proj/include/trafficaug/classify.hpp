#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trafficaug/dataset.hpp"
#include "trafficaug/neural.hpp"

namespace trafficaug {

struct ClassifierConfig {
  std::vector<int> hidden = {256, 128};
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_stddev = 0.02;
  std::uint64_t seed = 0;
  /// Consecutive epochs without a validation-loss improvement before
  /// training stops early. 0 disables early stopping.
  int patience = 10;
};

struct TrainingCurves {
  std::vector<double> train_loss;  ///< Mean batch loss per epoch.
  std::vector<double> val_loss;    ///< Empty when no validation rows.
};

/// Trains a ReLU MLP with a Softmax head on categorical cross-entropy and
/// returns the parameters from the epoch with the lowest validation loss.
/// Classes absent from the training split produce a warning on stderr but
/// training proceeds. epochs == 0 returns the freshly initialized network.
Network train_classifier(const LabeledDataset& train, const LabeledDataset& val,
                         const ClassifierConfig& config,
                         TrainingCurves* curves = nullptr);

/// Argmax class of each row. Ties resolve to the lowest class index.
std::vector<int> predict(const Network& net, const Matrix& pbm);

/// counts(i, j) = rows whose true class is i and predicted class is j.
struct ConfusionMatrix {
  MatrixX<std::int64_t> counts;

  static ConfusionMatrix from_pairs(std::span<const int> truth,
                                    std::span<const int> predicted,
                                    int num_classes);
  std::int64_t total() const { return counts.sum(); }
  void to_csv(std::ostream& os) const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// An undefined ratio (zero denominator) is reported as 0 with the
  /// matching flag cleared.
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

/// Identification of the experiment a metrics report came from.
struct ReportProvenance {
  std::string method;        ///< none | ros | smote | gan | cgan | ...
  std::string dataset_hash;  ///< Content hash of the evaluated CSV.
  std::uint64_t seed = 0;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;  ///< Unweighted mean over classes.
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  ReportProvenance provenance;

  std::string to_text() const;
  std::string to_csv() const;
};

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm,
                                     std::vector<std::string> class_names,
                                     ReportProvenance provenance = {});

struct EvaluationResult {
  ConfusionMatrix confusion;
  MetricsReport metrics;
};

/// Runs the classifier over a non-empty test set and summarises.
EvaluationResult evaluate(const Network& net, const LabeledDataset& test,
                          ReportProvenance provenance = {});

/// Published full-corpus reference points for the same pipeline run at
/// production scale (15 application classes, 1480-byte vectors, balanced to
/// 10000 rows per class, 200000 training steps). Kept for context in
/// comparison output; desk-scale runs are not expected to reproduce them.
struct ReferenceMetrics {
  const char* method;
  double accuracy, precision, recall, f1;
};
std::span<const ReferenceMetrics> full_scale_reference();

/// Side-by-side table over several runs: one row per report, columns
/// accuracy / precision / recall / F1, plus a per-class breakdown. All
/// reports must share one class table.
std::string compare_methods(std::span<const MetricsReport> reports);
std::string compare_methods_csv(std::span<const MetricsReport> reports);

}  // namespace trafficaug
