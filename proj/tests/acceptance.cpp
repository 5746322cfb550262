// Acceptance suite for the traffic-dataset augmentation toolkit.
//
// Runs ten end-to-end checks — file formats, preprocessing, gradients,
// resamplers, adversarial training, the full comparison pipeline, metric
// arithmetic, reference metadata, and determinism — each against an
// independent oracle or a pinned tolerance. Prints one PASS/FAIL line per
// check and exits with the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "oracles.hpp"
#include "testutil.hpp"
#include "trafficaug/cgan.hpp"
#include "trafficaug/classify.hpp"
#include "trafficaug/dataset.hpp"
#include "trafficaug/gan.hpp"
#include "trafficaug/neural.hpp"
#include "trafficaug/pcap.hpp"
#include "trafficaug/pipeline.hpp"
#include "trafficaug/preprocess.hpp"
#include "trafficaug/resample.hpp"
#include "trafficaug/rng.hpp"
#include "trafficaug/types.hpp"

using namespace trafficaug;

namespace {

int failures = 0;

struct Outcome {
  bool ok = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

template <typename Fn>
void check(int num, const char* name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    outcome = fn();
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.detail = std::string("exception: ") + e.what();
  }
  const double secs = seconds_since(start);
  std::printf("%s %2d/10 %s (%.1fs)%s%s\n", outcome.ok ? "PASS" : "FAIL", num,
              name, secs, outcome.detail.empty() ? "" : " | ",
              outcome.detail.c_str());
  std::fflush(stdout);
  if (!outcome.ok) ++failures;
}

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::vector<std::string> generic_names(int n) {
  std::vector<std::string> out;
  for (int c = 0; c < n; ++c) out.push_back("c" + std::to_string(c));
  return out;
}

std::vector<std::int64_t> label_counts(const std::vector<int>& labels, int n) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n), 0);
  for (int l : labels) counts[static_cast<std::size_t>(l)]++;
  return counts;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Check 5 helper: train a discriminator alone on a fixed two-point problem.
// Real mass is {0.2 at x=0.1, 0.8 at x=0.9}; the frozen "generator" emits the
// same two points with equal probability. The optimum is known in closed
// form, so the trained network can be compared against it.
// ---------------------------------------------------------------------------

struct ToyDiscriminator {
  double d_low = 0.0;   // trained D(0.1)
  double d_high = 0.0;  // trained D(0.9)
  std::string bytes;    // serialized network, for determinism comparison
};

ToyDiscriminator train_toy_discriminator(std::uint64_t seed) {
  const Rng root(seed);
  const std::vector<LayerSpec> specs{{1, 64, Activation::LeakyReLU},
                                     {64, 1, Activation::Linear}};
  Rng init = root.fork("toy.init");
  Network d = Network::random(specs, init, 0.02);
  AdamState adam(d, {.lr = 1e-3});
  Rng draw = root.fork("toy.draw");

  const Index half = 64;
  Matrix x(2 * half, 1);
  Matrix targets(2 * half, 1);
  for (int step = 0; step < 2000; ++step) {
    for (Index i = 0; i < half; ++i) {
      x(i, 0) = draw.uniform01() < 0.2 ? 0.1 : 0.9;  // real: 20% low, 80% high
      targets(i, 0) = 1.0;
    }
    for (Index i = half; i < 2 * half; ++i) {
      x(i, 0) = draw.uniform01() < 0.5 ? 0.1 : 0.9;  // fake: uniform support
      targets(i, 0) = 0.0;
    }
    ForwardCache cache;
    const Matrix logits = d.forward_cached(x, cache);
    const LossResult loss = loss_value_and_grad(
        LossKind::SigmoidCrossEntropyWithLogits, logits, targets);
    const BackwardResult back = d.backward(cache, loss.grad);
    adam.step(d, back.grads);
  }

  Matrix probe(2, 1);
  probe << 0.1, 0.9;
  const Matrix out = sigmoid(d.forward_eval(probe));
  ToyDiscriminator result;
  result.d_low = out(0, 0);
  result.d_high = out(1, 0);
  std::ostringstream os;
  save_network(os, d);
  result.bytes = os.str();
  return result;
}

// ---------------------------------------------------------------------------
// Desk-scale configuration shared by checks 6, 7, and 10: 64-byte vectors,
// three template classes, generator/discriminator ladders scaled down from
// the production shapes, a few thousand steps.
// ---------------------------------------------------------------------------

constexpr int kDeskDim = 64;
constexpr std::uint64_t kDeskDataSeed = 20240801;
constexpr std::uint64_t kDeskTrainSeed = 20240802;
constexpr std::uint64_t kDeskPipelineSeed = 20240803;

template <typename Config>
Config desk_adversarial_config() {
  Config cfg;
  cfg.noise_dim = 16;
  cfg.g_hidden = {32, 64};
  cfg.d_hidden = {64, 32, 16};
  cfg.steps = 4000;
  cfg.batch_size = 64;
  cfg.g_lr = 2e-4;
  cfg.d_lr = 2e-4;
  return cfg;
}

ClassifierConfig desk_classifier_config() {
  ClassifierConfig cfg;
  cfg.hidden = {64};
  cfg.epochs = 25;
  cfg.batch_size = 64;
  return cfg;
}

struct DeskCganRun {
  CganModel model;
  TrainHistory history;
  std::string model_bytes;
  std::vector<Matrix> samples;       // 500 rows per class
  std::vector<double> fidelity;      // oracle agreement per class
  double oracle_accuracy = 0.0;      // oracle classifier on real test rows
  double max_abs_loss = 0.0;
  bool losses_finite = true;
};

DeskCganRun run_desk_cgan() {
  const LabeledDataset real =
      testutil::template_dataset(3, kDeskDim, {1000, 1000, 1000}, 0.05,
                                 kDeskDataSeed);

  CganConfig cfg = desk_adversarial_config<CganConfig>();
  cfg.seed = kDeskTrainSeed;

  DeskCganRun run;
  run.model = train_cgan(real, cfg, &run.history);
  for (std::size_t i = 0; i < run.history.d_loss.size(); ++i) {
    const double d = run.history.d_loss[i];
    const double g = run.history.g_loss[i];
    if (!std::isfinite(d) || !std::isfinite(g)) run.losses_finite = false;
    run.max_abs_loss = std::max({run.max_abs_loss, std::abs(d), std::abs(g)});
  }

  std::ostringstream os;
  save_cgan(os, run.model);
  run.model_bytes = os.str();

  // Oracle classifier: trained on real rows only, never on generated data.
  const SplitResult split = stratified_split(real, {}, kDeskTrainSeed + 1);
  ClassifierConfig oracle_cfg = desk_classifier_config();
  oracle_cfg.seed = kDeskTrainSeed + 2;
  const Network oracle = train_classifier(split.train, split.validation,
                                          oracle_cfg);
  const std::vector<int> test_pred = predict(oracle, split.test.pbm);
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < test_pred.size(); ++i)
    if (test_pred[i] == split.test.labels[i]) ++hits;
  run.oracle_accuracy =
      static_cast<double>(hits) / static_cast<double>(test_pred.size());

  const Rng root(kDeskTrainSeed);
  for (int c = 0; c < 3; ++c) {
    const Matrix rows = generate_conditional(
        run.model, c, 500, root.fork("fidelity." + std::to_string(c)).seed());
    const std::vector<int> pred = predict(oracle, rows);
    std::int64_t agree = 0;
    for (int p : pred)
      if (p == c) ++agree;
    run.samples.push_back(rows);
    run.fidelity.push_back(static_cast<double>(agree) / 500.0);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Check 7 helper: the full five-method comparison, run through the pipeline
// stages exactly as the CLI drives them. Returns everything check 10 needs
// to verify a rerun is bitwise identical.
// ---------------------------------------------------------------------------

const std::vector<std::string> kMethods{"none", "ros", "smote", "gan", "cgan"};

struct ComparisonRun {
  std::map<std::string, MetricsReport> metrics;
  std::map<std::string, std::string> artifact_hashes;  // relative path -> hash
  std::string comparison_txt;
  std::string comparison_csv;
  bool counts_ok = true;
  std::string counts_detail;
};

ComparisonRun run_comparison(const std::filesystem::path& root) {
  const LabeledDataset desk =
      testutil::template_dataset(3, kDeskDim, {1000, 100, 50}, 0.05,
                                 kDeskDataSeed + 7);
  std::filesystem::create_directories(root / "data");
  const auto data_csv = root / "data" / "dataset.csv";
  write_csv_file(data_csv, desk.pbm, desk.labels);
  write_class_names(root / "data" / "classes.txt", desk.class_names);

  ComparisonRun run;
  std::vector<std::filesystem::path> run_dirs;
  for (const std::string& method : kMethods) {
    PipelineConfig cfg;
    cfg.seed = kDeskPipelineSeed;
    cfg.out_dir = root / method;
    cfg.augmenter = method;
    cfg.smote.k = 5;
    cfg.gan = desk_adversarial_config<GanConfig>();
    cfg.cgan = desk_adversarial_config<CganConfig>();
    cfg.classifier = desk_classifier_config();

    AugmentOptions opts;
    opts.method = method;
    opts.train_inline = method == "gan" || method == "cgan";
    run_augment(cfg, data_csv, opts);

    const CsvData balanced = read_csv_file(cfg.out_dir / "balanced.csv");
    const std::vector<std::int64_t> counts = label_counts(balanced.labels, 3);
    const std::vector<std::int64_t> want =
        method == "none" ? std::vector<std::int64_t>{1000, 100, 50}
                         : std::vector<std::int64_t>{1000, 1000, 1000};
    if (counts != want) {
      run.counts_ok = false;
      run.counts_detail += method + " counts " + std::to_string(counts[0]) +
                           "/" + std::to_string(counts[1]) + "/" +
                           std::to_string(counts[2]) + "; ";
    }

    run_split(cfg, cfg.out_dir / "balanced.csv");
    run_classify(cfg, cfg.out_dir / "train.csv", cfg.out_dir / "validation.csv");
    EvaluateOptions eval;
    eval.method = method;
    run_evaluate(cfg, eval);

    run.metrics.emplace(method,
                        load_metrics_json(cfg.out_dir / "metrics.json"));
    for (const char* name : {"balanced.csv", "classifier.ckpt", "metrics.json"})
      run.artifact_hashes[method + "/" + name] =
          file_hash(cfg.out_dir / name);
    if (method == "cgan")
      run.artifact_hashes["cgan/cgan.ckpt"] = file_hash(cfg.out_dir / "cgan.ckpt");
    if (method == "gan")
      for (int c : {1, 2})
        run.artifact_hashes["gan/gan_class_" + std::to_string(c) + ".ckpt"] =
            file_hash(cfg.out_dir / ("gan_class_" + std::to_string(c) + ".ckpt"));
    run_dirs.push_back(cfg.out_dir);
  }

  run_report(root / "report", run_dirs);
  run.comparison_txt = read_text(root / "report" / "comparison.txt");
  run.comparison_csv = read_text(root / "report" / "comparison.csv");
  return run;
}

// Results carried into the determinism check.
std::optional<ToyDiscriminator> toy_first;
std::optional<DeskCganRun> desk_first;
std::optional<ComparisonRun> comparison_first;

constexpr std::uint64_t kToySeed = 20240804;

}  // namespace

int main() {
  std::printf("acceptance checks, %s %s\n", kToolName, kToolVersion);

  // -------------------------------------------------------------------------
  check(1, "pcap writer/parser round trip and protocol filter tallies", [] {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(101);
    for (const std::uint32_t magic : {kPcapMagic, kPcapMagicSwapped}) {
      PcapFile file;
      file.header.magic = magic;
      for (int i = 0; i < 1000; ++i) {
        RawPacket p;
        p.ts_sec = static_cast<std::uint32_t>(rng.uniform_below(1u << 30));
        p.ts_usec = static_cast<std::uint32_t>(rng.uniform_below(1000000));
        Bytes b(20 + rng.uniform_below(201));
        for (auto& byte : b)
          byte = static_cast<std::uint8_t>(rng.uniform_below(256));
        p.incl_len = static_cast<std::uint32_t>(b.size());
        p.orig_len = p.incl_len + static_cast<std::uint32_t>(rng.uniform_below(64));
        p.bytes = std::move(b);
        file.packets.push_back(std::move(p));
      }
      const Bytes first = write_pcap(file);
      const PcapFile parsed = parse_pcap(first);
      if (parsed.packets.size() != 1000)
        return Outcome{false, "parsed packet count mismatch"};
      const Bytes second = write_pcap(parsed);
      if (first != second)
        return Outcome{false, magic == kPcapMagic
                                  ? "little-endian rewrite differs"
                                  : "big-endian rewrite differs"};
    }

    // 2 ARP + 1 DHCPv4 + 7 application frames -> exactly 7 survive.
    std::vector<Bytes> frames{testutil::arp_frame(), testutil::arp_frame(),
                              testutil::ipv4_udp_frame(68, 67)};
    for (int i = 0; i < 4; ++i)
      frames.push_back(testutil::ipv4_tcp_frame(443, static_cast<std::uint16_t>(50000 + i)));
    for (int i = 0; i < 3; ++i)
      frames.push_back(testutil::ipv4_udp_frame(static_cast<std::uint16_t>(40000 + i), 50100));
    const auto dir = testutil::scratch_dir("accept_pcap");
    write_pcap_file(dir / "mixed.pcap", testutil::capture_of(frames));
    const std::vector<IngestEntry> entries{{dir / "mixed.pcap", "mixed"}};
    const IngestResult result = ingest_files(entries);
    if (result.packets.size() != 7)
      return Outcome{false, "filter kept " + std::to_string(result.packets.size()) +
                                " of 10 frames, expected 7"};

    const double secs = seconds_since(start);
    if (secs >= 5.0) return Outcome{false, "took " + fmt(secs, 1) + "s, limit 5s"};
    return Outcome{true, "2x1000 packets byte-identical; 7/10 frames kept"};
  });

  // -------------------------------------------------------------------------
  check(2, "preprocessing properties and lossless CSV round trip", [] {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(202);
    const int n = 10000;
    const int width = 1480;
    Matrix pbm(n, width);
    std::vector<int> labels;
    labels.reserve(n);
    for (int i = 0; i < n; ++i) {
      Bytes b(rng.uniform_below(3001));
      for (auto& byte : b)
        byte = static_cast<std::uint8_t>(rng.uniform_below(256));
      const Bytes fixed = fix_length(b, width);
      if (static_cast<int>(fixed.size()) != width)
        return Outcome{false, "fix_length produced " +
                                  std::to_string(fixed.size()) + " bytes"};
      const Vector v = normalize_bytes(fixed);
      if (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0)
        return Outcome{false, "normalized values escaped [0,1]"};
      pbm.row(i) = v.transpose();
      labels.push_back(static_cast<int>(rng.uniform_below(15)));
    }

    const auto dir = testutil::scratch_dir("accept_csv");
    const auto csv = dir / "roundtrip.csv";
    write_csv_file(csv, pbm, labels);
    const CsvData back = read_csv_file(csv);
    std::error_code ec;
    std::filesystem::remove(csv, ec);
    if (back.labels != labels) return Outcome{false, "labels changed"};
    if (back.pbm.rows() != pbm.rows() || back.pbm.cols() != pbm.cols())
      return Outcome{false, "matrix shape changed"};
    const double max_err = (back.pbm - pbm).cwiseAbs().maxCoeff();
    if (max_err > 1e-9)
      return Outcome{false, "round-trip error " + fmt_sci(max_err)};

    const double secs = seconds_since(start);
    if (secs >= 30.0) return Outcome{false, "took " + fmt(secs, 1) + "s, limit 30s"};
    return Outcome{true, "10000 vectors; max round-trip error " + fmt_sci(max_err)};
  });

  // -------------------------------------------------------------------------
  check(3, "analytic gradients vs central differences on 20 architectures", [] {
    const auto start = std::chrono::steady_clock::now();
    Rng arch_rng(303);
    double worst = 0.0;
    long total_checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const Activation acts[] = {Activation::ReLU, Activation::LeakyReLU,
                                 Activation::Sigmoid, Activation::Linear};
      const int depth = 1 + static_cast<int>(arch_rng.uniform_below(3));
      const bool softmax_head = trial % 2 == 0;

      std::vector<LayerSpec> specs;
      Index prev = 2 + static_cast<Index>(arch_rng.uniform_below(15));
      const Index in = prev;
      for (int l = 0; l + 1 < depth; ++l) {
        const Index width = 2 + static_cast<Index>(arch_rng.uniform_below(15));
        specs.push_back({prev, width, acts[(trial + l) % 4]});
        prev = width;
      }
      const Index out = 2 + static_cast<Index>(arch_rng.uniform_below(7));
      specs.push_back({prev, out,
                       softmax_head ? Activation::Softmax : Activation::Linear});

      Rng init(4000 + trial);
      Network net = Network::random(specs, init, 0.1);
      const Index batch = 3;
      Matrix x(batch, in);
      for (Index r = 0; r < batch; ++r)
        for (Index c = 0; c < in; ++c) x(r, c) = init.normal();
      Matrix targets = Matrix::Zero(batch, out);
      if (softmax_head) {
        for (Index r = 0; r < batch; ++r)
          targets(r, static_cast<Index>(init.uniform_below(
                         static_cast<std::uint64_t>(out)))) = 1.0;
      } else {
        for (Index r = 0; r < batch; ++r)
          for (Index c = 0; c < out; ++c)
            targets(r, c) = init.uniform01() < 0.5 ? 0.0 : 1.0;
      }

      // Loss recomputed from first principles on the network output.
      const auto loss_of_output = [&](const Matrix& y) {
        if (softmax_head) {
          double s = 0.0;
          for (Index r = 0; r < y.rows(); ++r)
            for (Index c = 0; c < y.cols(); ++c)
              if (targets(r, c) == 1.0)
                s -= std::log(std::min(1.0, std::max(y(r, c), 1e-12)));
          return s / static_cast<double>(y.rows());
        }
        double s = 0.0;
        for (Index r = 0; r < y.rows(); ++r)
          for (Index c = 0; c < y.cols(); ++c) {
            const double z = y(r, c);
            s += std::max(z, 0.0) - z * targets(r, c) +
                 std::log1p(std::exp(-std::abs(z)));
          }
        return s / static_cast<double>(y.size());
      };

      ForwardCache cache;
      const Matrix y = net.forward_cached(x, cache);
      const LossResult loss = loss_value_and_grad(
          softmax_head ? LossKind::CategoricalCrossEntropy
                       : LossKind::SigmoidCrossEntropyWithLogits,
          y, targets);
      const BackwardResult analytic = net.backward(cache, loss.grad);

      const oracles::GradCheckResult res = oracles::finite_difference_check(
          net, x, loss_of_output, analytic.grads);
      worst = std::max(worst, res.max_rel_err);
      total_checked += res.checked;
      if (res.checked == 0) return Outcome{false, "no coordinates checked"};
    }
    if (worst >= 1e-4)
      return Outcome{false, "max relative error " + fmt_sci(worst)};
    const double secs = seconds_since(start);
    if (secs >= 60.0) return Outcome{false, "took " + fmt(secs, 1) + "s, limit 60s"};
    return Outcome{true, std::to_string(total_checked) +
                             " coordinates, max relative error " + fmt_sci(worst)};
  });

  // -------------------------------------------------------------------------
  check(4, "resampler oracles: SMOTE segments, exact kNN, ROS membership", [] {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(404);

    // Distance from a point to the segment [p, q].
    const auto segment_distance = [](const Eigen::RowVector2d& s,
                                     const Eigen::RowVector2d& p,
                                     const Eigen::RowVector2d& q) {
      const Eigen::RowVector2d d = q - p;
      const double len2 = d.squaredNorm();
      const double t =
          len2 == 0.0 ? 0.0 : std::clamp((s - p).dot(d) / len2, 0.0, 1.0);
      return (s - (p + t * d)).norm();
    };

    for (int trial = 0; trial < 5; ++trial) {
      const Index n = 50 + static_cast<Index>(rng.uniform_below(151));
      Matrix points(n, 2);
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < 2; ++c) points(r, c) = rng.uniform01();
      const LabeledDataset minority = make_dataset(
          points, std::vector<int>(static_cast<std::size_t>(n), 0), {"m"});
      const std::int64_t target = n + 40 + static_cast<std::int64_t>(rng.uniform_below(61));
      const BalancePlan plan = make_balance_plan(minority, target);
      const LabeledDataset synth = smote(minority, plan, {.k = 5}, rng.next_u64());
      if (synth.rows() != target - n)
        return Outcome{false, "SMOTE produced wrong row count"};

      for (Index s = 0; s < synth.rows(); ++s) {
        const Eigen::RowVector2d sample = synth.pbm.row(s);
        double best = 1e300;
        for (Index base = 0; base < n && best > 1e-9; ++base) {
          for (Index nb : oracles::brute_knn(points, base, 5)) {
            best = std::min(best, segment_distance(sample, points.row(base),
                                                   points.row(nb)));
            if (best <= 1e-9) break;
          }
        }
        if (best > 1e-9)
          return Outcome{false, "synthetic point " + fmt(best, 12) +
                                    " away from every base-neighbor segment"};
      }
    }

    for (int trial = 0; trial < 100; ++trial) {
      const Index n = 10 + static_cast<Index>(rng.uniform_below(41));
      const Index dim = 2 + static_cast<Index>(rng.uniform_below(4));
      Matrix pts(n, dim);
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < dim; ++c) pts(r, c) = rng.uniform01();
      const Index query = static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(n)));
      const int k = 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n - 1)));
      if (knn(pts, query, k) != oracles::brute_knn(pts, query, k))
        return Outcome{false, "kNN disagrees with exhaustive search"};
    }

    // ROS: every synthesized row is an exact copy of a class row.
    Matrix pbm(42, 3);
    std::vector<int> labels;
    for (Index r = 0; r < 42; ++r) {
      for (Index c = 0; c < 3; ++c) pbm(r, c) = rng.uniform01();
      labels.push_back(r < 30 ? 0 : 1);
    }
    const LabeledDataset two = make_dataset(pbm, labels, {"big", "small"});
    const LabeledDataset extra =
        ros_oversample(two, make_balance_plan(two, 30), rng.next_u64());
    if (extra.rows() != 18) return Outcome{false, "ROS produced wrong row count"};
    for (Index s = 0; s < extra.rows(); ++s) {
      if (extra.labels[static_cast<std::size_t>(s)] != 1)
        return Outcome{false, "ROS emitted a row for the majority class"};
      bool found = false;
      for (Index r = 30; r < 42 && !found; ++r)
        found = (extra.pbm.row(s).array() == pbm.row(r).array()).all();
      if (!found) return Outcome{false, "ROS row is not a copy of any original"};
    }

    const double secs = seconds_since(start);
    if (secs >= 30.0) return Outcome{false, "took " + fmt(secs, 1) + "s, limit 30s"};
    return Outcome{true, "5 SMOTE classes, 100 kNN instances, 18 ROS copies"};
  });

  // -------------------------------------------------------------------------
  check(5, "trained discriminator reaches the closed-form optimum", [] {
    const ToyDiscriminator toy = train_toy_discriminator(kToySeed);
    toy_first = toy;
    const double want_low = optimal_discriminator_value(0.2, 0.5);    // 2/7
    const double want_high = optimal_discriminator_value(0.8, 0.5);   // 8/13
    const double err_low = std::abs(toy.d_low - want_low);
    const double err_high = std::abs(toy.d_high - want_high);
    const std::string detail = "D(0.1)=" + fmt(toy.d_low) + " target " +
                               fmt(want_low) + ", D(0.9)=" + fmt(toy.d_high) +
                               " target " + fmt(want_high) + ", tolerance 0.05";
    if (err_low > 0.05 || err_high > 0.05) return Outcome{false, detail};
    return Outcome{true, detail};
  });

  // -------------------------------------------------------------------------
  check(6, "conditional generator fidelity at desk scale", [] {
    const auto start = std::chrono::steady_clock::now();
    const DeskCganRun run = run_desk_cgan();
    desk_first = run;

    if (!run.losses_finite) return Outcome{false, "loss history not finite"};
    if (run.max_abs_loss > 50.0)
      return Outcome{false, "loss magnitude diverged to " + fmt(run.max_abs_loss, 2)};
    std::string detail = "oracle accuracy " + fmt(run.oracle_accuracy, 3) +
                         "; fidelity";
    bool ok = true;
    for (int c = 0; c < 3; ++c) {
      detail += " " + fmt(run.fidelity[static_cast<std::size_t>(c)], 3);
      ok = ok && run.fidelity[static_cast<std::size_t>(c)] >= 0.90;
    }
    detail += " (threshold 0.90, 500 samples/class)";
    const double secs = seconds_since(start);
    if (secs >= 600.0) return Outcome{false, "took " + fmt(secs, 1) + "s, limit 600s"};
    return Outcome{ok, detail};
  });

  // -------------------------------------------------------------------------
  check(7, "five-method comparison keeps minority F1 within 0.02", [] {
    const auto start = std::chrono::steady_clock::now();
    const ComparisonRun run = run_comparison(testutil::scratch_dir("accept_cmp"));
    comparison_first = run;

    if (!run.counts_ok)
      return Outcome{false, "balanced counts wrong: " + run.counts_detail};

    const MetricsReport& base = run.metrics.at("none");
    std::string detail;
    bool ok = true;
    for (int c : {1, 2}) {
      const double floor = base.per_class[static_cast<std::size_t>(c)].f1 - 0.02;
      detail += "class" + std::to_string(c) + " F1:";
      detail += " none " + fmt(base.per_class[static_cast<std::size_t>(c)].f1, 3);
      for (const std::string& method : {"ros", "smote", "gan", "cgan"}) {
        const double f1 =
            run.metrics.at(method).per_class[static_cast<std::size_t>(c)].f1;
        detail += " " + method + " " + fmt(f1, 3);
        if (f1 < floor) {
          ok = false;
          detail += "(<floor)";
        }
      }
      detail += "; ";
    }

    if (run.comparison_txt.find("\ncgan ") == std::string::npos ||
        run.comparison_csv.find("reference_cgan") == std::string::npos)
      return Outcome{false, "comparison report incomplete"};

    const double secs = seconds_since(start);
    if (secs >= 900.0) return Outcome{false, "took " + fmt(secs, 1) + "s, limit 900s"};
    return Outcome{ok, detail};
  });

  // -------------------------------------------------------------------------
  check(8, "metric arithmetic matches brute-force tallies", [] {
    Rng rng(808);
    for (int trial = 0; trial < 50; ++trial) {
      const int C = 2 + static_cast<int>(rng.uniform_below(7));
      MatrixX<std::int64_t> counts(C, C);
      std::vector<int> truth, pred;
      for (int i = 0; i < C; ++i)
        for (int j = 0; j < C; ++j) {
          const auto n = static_cast<std::int64_t>(rng.uniform_below(21));
          counts(i, j) = n;
          for (std::int64_t r = 0; r < n; ++r) {
            truth.push_back(i);
            pred.push_back(j);
          }
        }
      if (truth.empty()) {
        counts(0, 0) = 1;
        truth.push_back(0);
        pred.push_back(0);
      }

      const MetricsReport report =
          metrics_from_confusion(ConfusionMatrix{counts}, generic_names(C));
      const std::vector<oracles::TalliedClass> tally =
          oracles::tally_metrics(truth, pred, C);

      double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
      std::int64_t hits = 0;
      for (int c = 0; c < C; ++c) {
        const auto& got = report.per_class[static_cast<std::size_t>(c)];
        const auto& want = tally[static_cast<std::size_t>(c)];
        if (std::abs(got.precision - want.precision) > 1e-12 ||
            std::abs(got.recall - want.recall) > 1e-12 ||
            std::abs(got.f1 - want.f1) > 1e-12)
          return Outcome{false, "per-class metric mismatch in trial " +
                                    std::to_string(trial)};
        macro_p += want.precision;
        macro_r += want.recall;
        macro_f += want.f1;
        hits += want.tp;
      }
      const double n = static_cast<double>(truth.size());
      if (std::abs(report.accuracy - static_cast<double>(hits) / n) > 1e-12 ||
          std::abs(report.macro_precision - macro_p / C) > 1e-12 ||
          std::abs(report.macro_recall - macro_r / C) > 1e-12 ||
          std::abs(report.macro_f1 - macro_f / C) > 1e-12)
        return Outcome{false, "aggregate metric mismatch in trial " +
                                  std::to_string(trial)};
    }

    // Hand-checked case: 8 true positives, 2 false positives, 4 false negatives.
    MatrixX<std::int64_t> hand(2, 2);
    hand << 8, 4, 2, 6;
    const MetricsReport report =
        metrics_from_confusion(ConfusionMatrix{hand}, generic_names(2));
    const std::string p = fmt(report.per_class[0].precision);
    const std::string r = fmt(report.per_class[0].recall);
    const std::string f = fmt(report.per_class[0].f1);
    if (p != "0.8000" || r != "0.6667" || f != "0.7273")
      return Outcome{false, "hand case yielded " + p + "/" + r + "/" + f};
    return Outcome{true, "50 random tallies to 1e-12; hand case 0.8000/0.6667/0.7273"};
  });

  // -------------------------------------------------------------------------
  check(9, "full-scale results are reference metadata, not desk targets", [] {
    const std::span<const ReferenceMetrics> refs = full_scale_reference();
    if (refs.size() != 5) return Outcome{false, "expected 5 reference rows"};
    const struct {
      std::string_view method;
      double acc, prec, rec, f1;
    } want[] = {{"unbalanced", 0.9797, 0.9759, 0.9775, 0.9766},
                {"ros", 0.9889, 0.9892, 0.9889, 0.9891},
                {"smote", 0.9769, 0.9751, 0.9789, 0.9710},
                {"gan", 0.9766, 0.9766, 0.9767, 0.9766},
                {"cgan", 0.9951, 0.9936, 0.9958, 0.9947}};
    for (int i = 0; i < 5; ++i) {
      const ReferenceMetrics& got = refs[static_cast<std::size_t>(i)];
      if (std::string_view(got.method) != want[i].method ||
          got.accuracy != want[i].acc ||
          got.precision != want[i].prec || got.recall != want[i].rec ||
          got.f1 != want[i].f1)
        return Outcome{false, "reference row '" + std::string(want[i].method) +
                                  "' does not carry the published values"};
    }

    // The comparison report embeds them, flagged as not comparable to desk runs.
    MatrixX<std::int64_t> cm(2, 2);
    cm << 5, 1, 1, 5;
    ReportProvenance prov;
    prov.method = "cgan";
    const MetricsReport desk =
        metrics_from_confusion(ConfusionMatrix{cm}, generic_names(2), prov);
    const std::vector<MetricsReport> reports{desk};
    const std::string text = compare_methods(reports);
    for (const char* needle : {"0.9797", "0.9889", "0.9769", "0.9766", "0.9951",
                               "not expected to match"})
      if (text.find(needle) == std::string::npos)
        return Outcome{false, std::string("report lacks '") + needle + "'"};
    return Outcome{true,
                   "published numbers present and explicitly marked non-comparable"};
  });

  // -------------------------------------------------------------------------
  check(10, "training and pipeline reruns are bitwise identical", [] {
    if (!toy_first || !desk_first || !comparison_first)
      return Outcome{false, "checks 5-7 must complete first"};

    const ToyDiscriminator toy_again = train_toy_discriminator(kToySeed);
    if (toy_again.bytes != toy_first->bytes)
      return Outcome{false, "discriminator checkpoint differs between runs"};

    const DeskCganRun desk_again = run_desk_cgan();
    if (desk_again.model_bytes != desk_first->model_bytes)
      return Outcome{false, "conditional model checkpoint differs between runs"};
    for (int c = 0; c < 3; ++c)
      if (!(desk_again.samples[static_cast<std::size_t>(c)].array() ==
            desk_first->samples[static_cast<std::size_t>(c)].array())
               .all())
        return Outcome{false, "generated samples differ between runs"};

    const ComparisonRun cmp_again =
        run_comparison(testutil::scratch_dir("accept_cmp_rerun"));
    if (cmp_again.artifact_hashes != comparison_first->artifact_hashes)
      return Outcome{false, "pipeline artifact hashes differ between runs"};
    if (cmp_again.comparison_txt != comparison_first->comparison_txt ||
        cmp_again.comparison_csv != comparison_first->comparison_csv)
      return Outcome{false, "comparison reports differ between runs"};

    return Outcome{true,
                   std::to_string(comparison_first->artifact_hashes.size()) +
                       " artifacts, 2 checkpoints, 1500 samples all identical"};
  });

  std::printf("%d/10 checks passed\n", 10 - failures);
  return failures;
}
