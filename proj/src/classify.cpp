#include "trafficaug/classify.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace trafficaug {

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Network build_classifier(Index input_dim, int num_classes,
                         const ClassifierConfig& config, Rng& rng) {
  std::vector<LayerSpec> specs;
  Index prev = input_dim;
  for (int width : config.hidden) {
    specs.push_back({prev, width, Activation::ReLU, 0.0, 0.2});
    prev = width;
  }
  specs.push_back({prev, num_classes, Activation::Softmax, 0.0, 0.2});
  return Network::random(specs, rng, config.weight_stddev);
}

}  // namespace

Network train_classifier(const LabeledDataset& train, const LabeledDataset& val,
                         const ClassifierConfig& config, TrainingCurves* curves) {
  if (train.dim() <= 0) throw DataError("classifier: training data has no columns");
  if (train.num_classes() <= 0) throw DataError("classifier: empty class table");
  if (config.epochs < 0) throw DataError("classifier: negative epoch count");
  if (config.batch_size <= 0) throw DataError("classifier: batch_size must be positive");
  if (val.rows() > 0 && val.dim() != train.dim())
    throw DataError("classifier: validation width does not match training width");

  const int num_classes = train.num_classes();
  const ClassDistribution dist = class_histogram(train);
  for (int c = 0; c < num_classes; ++c)
    if (dist.counts[static_cast<std::size_t>(c)] == 0)
      std::fprintf(stderr,
                   "warning: class '%s' has no rows in the training split\n",
                   train.class_names[static_cast<std::size_t>(c)].c_str());

  Rng root(config.seed);
  Rng init_rng = root.fork("classifier.init");
  Rng shuffle_rng = root.fork("classifier.shuffle");

  Network net = build_classifier(train.dim(), num_classes, config, init_rng);
  if (config.epochs == 0 || train.rows() == 0) return net;

  AdamState opt(net, {.lr = config.lr});
  const Matrix val_onehot =
      val.rows() > 0 ? one_hot(val.labels, num_classes) : Matrix();

  Network best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;

  std::vector<Index> order(static_cast<std::size_t>(train.rows()));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto rows = static_cast<Index>(end - start);
      Matrix batch(rows, train.dim());
      std::vector<int> batch_labels(static_cast<std::size_t>(rows));
      for (std::size_t i = start; i < end; ++i) {
        batch.row(static_cast<Index>(i - start)) = train.pbm.row(order[i]);
        batch_labels[i - start] =
            train.labels[static_cast<std::size_t>(order[i])];
      }
      const Matrix targets = one_hot(batch_labels, num_classes);

      ForwardCache cache;
      const Matrix probs = net.forward_cached(batch, cache);
      loss_sum +=
          loss_value_and_grad(LossKind::CategoricalCrossEntropy, probs, targets)
              .value;
      ++batches;
      opt.step(net, net.backward_softmax_xent(cache, targets).grads);
    }

    const double train_loss = loss_sum / std::max(1, batches);
    if (!std::isfinite(train_loss))
      throw NumericError("non-finite training loss in epoch " +
                             std::to_string(epoch + 1), epoch + 1);
    if (curves) curves->train_loss.push_back(train_loss);

    if (val.rows() > 0) {
      const double val_loss =
          loss_value_and_grad(LossKind::CategoricalCrossEntropy,
                              net.forward_eval(val.pbm), val_onehot)
              .value;
      if (curves) curves->val_loss.push_back(val_loss);
      if (val_loss < best_val) {
        best_val = val_loss;
        best = net;
        stale_epochs = 0;
      } else if (++stale_epochs >= config.patience && config.patience > 0) {
        break;
      }
    } else {
      best = net;
    }
  }
  return best;
}

std::vector<int> predict(const Network& net, const Matrix& pbm) {
  const Matrix probs = net.forward_eval(pbm);
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) {
    int arg = 0;
    double best = probs(r, 0);
    for (Index c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > best) {
        best = probs(r, c);
        arg = static_cast<int>(c);
      }
    out[static_cast<std::size_t>(r)] = arg;
  }
  return out;
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const int> truth,
                                            std::span<const int> predicted,
                                            int num_classes) {
  if (truth.size() != predicted.size())
    throw DataError("confusion matrix: label sequences differ in length");
  if (num_classes <= 0) throw DataError("confusion matrix: no classes");

  ConfusionMatrix cm;
  cm.counts = MatrixX<std::int64_t>::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 ||
        predicted[i] >= num_classes)
      throw DataError("confusion matrix: label outside [0, " +
                      std::to_string(num_classes) + ") at row " + std::to_string(i));
    ++cm.counts(truth[i], predicted[i]);
  }
  return cm;
}

void ConfusionMatrix::to_csv(std::ostream& os) const {
  for (Index r = 0; r < counts.rows(); ++r) {
    for (Index c = 0; c < counts.cols(); ++c) {
      if (c > 0) os << ',';
      os << counts(r, c);
    }
    os << '\n';
  }
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm,
                                     std::vector<std::string> class_names,
                                     ReportProvenance provenance) {
  const Index n = cm.counts.rows();
  if (cm.counts.cols() != n)
    throw DataError("metrics: confusion matrix is not square");
  if (static_cast<Index>(class_names.size()) != n)
    throw DataError("metrics: class table size does not match confusion matrix");

  MetricsReport report;
  report.class_names = std::move(class_names);
  report.provenance = std::move(provenance);

  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (Index c = 0; c < n; ++c) {
    const auto tp = static_cast<double>(cm.counts(c, c));
    const auto fp = static_cast<double>(cm.counts.col(c).sum()) - tp;
    const auto fn = static_cast<double>(cm.counts.row(c).sum()) - tp;

    ClassMetrics m;
    m.precision_defined = tp + fp > 0.0;
    m.precision = m.precision_defined ? tp / (tp + fp) : 0.0;
    m.recall_defined = tp + fn > 0.0;
    m.recall = m.recall_defined ? tp / (tp + fn) : 0.0;
    m.f1_defined =
        m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0;
    m.f1 = m.f1_defined
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;

    p_sum += m.precision;
    r_sum += m.recall;
    f_sum += m.f1;
    report.per_class.push_back(m);
  }

  const auto classes = static_cast<double>(n);
  report.macro_precision = p_sum / classes;
  report.macro_recall = r_sum / classes;
  report.macro_f1 = f_sum / classes;
  const auto total = static_cast<double>(cm.total());
  report.accuracy =
      total > 0.0 ? static_cast<double>(cm.counts.trace()) / total : 0.0;
  return report;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "method " << provenance.method << "\n"
     << "dataset_hash " << provenance.dataset_hash << "\n"
     << "seed " << provenance.seed << "\n"
     << "accuracy " << fmt4(accuracy) << "\n"
     << "macro_precision " << fmt4(macro_precision) << "\n"
     << "macro_recall " << fmt4(macro_recall) << "\n"
     << "macro_f1 " << fmt4(macro_f1) << "\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const ClassMetrics& m = per_class[c];
    os << "class " << class_names[c] << " precision " << fmt4(m.precision)
       << " recall " << fmt4(m.recall) << " f1 " << fmt4(m.f1);
    if (!m.precision_defined || !m.recall_defined || !m.f1_defined) {
      os << " undefined";
      if (!m.precision_defined) os << " precision";
      if (!m.recall_defined) os << " recall";
      if (!m.f1_defined) os << " f1";
    }
    os << "\n";
  }
  return os.str();
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "class,precision,recall,f1\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const ClassMetrics& m = per_class[c];
    os << class_names[c] << ',' << fmt4(m.precision) << ',' << fmt4(m.recall)
       << ',' << fmt4(m.f1) << "\n";
  }
  os << "macro," << fmt4(macro_precision) << ',' << fmt4(macro_recall) << ','
     << fmt4(macro_f1) << "\n";
  os << "accuracy," << fmt4(accuracy) << ",,\n";
  return os.str();
}

EvaluationResult evaluate(const Network& net, const LabeledDataset& test,
                          ReportProvenance provenance) {
  if (test.rows() == 0) throw DataError("evaluate: test set is empty");
  if (net.output_dim() != test.num_classes())
    throw DataError("evaluate: network emits " + std::to_string(net.output_dim()) +
                    " classes but the dataset has " +
                    std::to_string(test.num_classes()));

  const std::vector<int> predicted = predict(net, test.pbm);
  EvaluationResult result;
  result.confusion =
      ConfusionMatrix::from_pairs(test.labels, predicted, test.num_classes());
  result.metrics = metrics_from_confusion(result.confusion, test.class_names,
                                          std::move(provenance));
  return result;
}

std::span<const ReferenceMetrics> full_scale_reference() {
  static constexpr ReferenceMetrics kReference[] = {
      {"unbalanced", 0.9797, 0.9759, 0.9775, 0.9766},
      {"ros", 0.9889, 0.9892, 0.9889, 0.9891},
      {"smote", 0.9769, 0.9751, 0.9789, 0.9710},
      {"gan", 0.9766, 0.9766, 0.9767, 0.9766},
      {"cgan", 0.9951, 0.9936, 0.9958, 0.9947},
  };
  return kReference;
}

namespace {

void check_reports(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw DataError("compare: no reports given");
  for (const MetricsReport& r : reports)
    if (r.class_names != reports.front().class_names)
      throw DataError("compare: reports use different class tables");
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string compare_methods(std::span<const MetricsReport> reports) {
  check_reports(reports);

  std::size_t name_width = std::string("method").size();
  for (const MetricsReport& r : reports)
    name_width = std::max(name_width, r.provenance.method.size());
  for (const ReferenceMetrics& r : full_scale_reference())
    name_width = std::max(name_width, std::string(r.method).size());
  name_width += 2;

  std::ostringstream os;
  os << pad("method", name_width) << "accuracy  precision  recall  f1\n";
  for (const MetricsReport& r : reports)
    os << pad(r.provenance.method, name_width) << fmt4(r.accuracy) << "    "
       << fmt4(r.macro_precision) << "     " << fmt4(r.macro_recall) << "  "
       << fmt4(r.macro_f1) << "\n";

  const auto& names = reports.front().class_names;
  std::size_t class_width = std::string("class").size();
  for (const std::string& n : names) class_width = std::max(class_width, n.size());
  class_width += 2;

  const struct {
    const char* title;
    double ClassMetrics::* field;
  } sections[] = {{"per-class precision", &ClassMetrics::precision},
                  {"per-class recall", &ClassMetrics::recall},
                  {"per-class f1", &ClassMetrics::f1}};
  for (const auto& section : sections) {
    os << "\n" << section.title << "\n" << pad("class", class_width);
    for (const MetricsReport& r : reports)
      os << pad(r.provenance.method, std::max<std::size_t>(8, r.provenance.method.size() + 2));
    os << "\n";
    for (std::size_t c = 0; c < names.size(); ++c) {
      os << pad(names[c], class_width);
      for (const MetricsReport& r : reports)
        os << pad(fmt4(r.per_class[c].*section.field),
                  std::max<std::size_t>(8, r.provenance.method.size() + 2));
      os << "\n";
    }
  }

  os << "\nreference: published full-scale results (15 classes, 1480-byte "
        "vectors, balanced to 10000 rows per class, 200000 training steps); "
        "desk-scale runs are not expected to match these\n";
  os << pad("method", name_width) << "accuracy  precision  recall  f1\n";
  for (const ReferenceMetrics& r : full_scale_reference())
    os << pad(r.method, name_width) << fmt4(r.accuracy) << "    "
       << fmt4(r.precision) << "     " << fmt4(r.recall) << "  " << fmt4(r.f1)
       << "\n";
  return os.str();
}

std::string compare_methods_csv(std::span<const MetricsReport> reports) {
  check_reports(reports);
  std::ostringstream os;
  os << "method,accuracy,precision,recall,f1\n";
  for (const MetricsReport& r : reports)
    os << r.provenance.method << ',' << fmt4(r.accuracy) << ','
       << fmt4(r.macro_precision) << ',' << fmt4(r.macro_recall) << ','
       << fmt4(r.macro_f1) << "\n";
  for (const ReferenceMetrics& r : full_scale_reference())
    os << "reference_" << r.method << ',' << fmt4(r.accuracy) << ','
       << fmt4(r.precision) << ',' << fmt4(r.recall) << ',' << fmt4(r.f1) << "\n";
  return os.str();
}

}  // namespace trafficaug
