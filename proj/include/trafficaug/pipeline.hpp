#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trafficaug/cgan.hpp"
#include "trafficaug/classify.hpp"
#include "trafficaug/dataset.hpp"
#include "trafficaug/gan.hpp"
#include "trafficaug/pcap.hpp"
#include "trafficaug/preprocess.hpp"
#include "trafficaug/resample.hpp"

namespace trafficaug {

inline constexpr const char* kToolName = "trafficaug";
inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a run needs, loadable from one JSON file. Defaults mirror the
/// production setup: 1480-byte vectors, 100-wide noise, batches of 64, Adam.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::vector<IngestEntry> inputs;
  PreprocessConfig preprocess;
  FilterRules filters;
  SplitFractions split;
  /// Per-class row target for balancing; 0 means "match the largest class".
  std::int64_t balance_target = 0;
  /// Exactly one augmenter per run: none | ros | smote | gan | cgan.
  std::string augmenter = "none";
  SmoteConfig smote;
  GanConfig gan;
  CganConfig cgan;
  ClassifierConfig classifier;
};

PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

/// Content hash (FNV-1a 64) of a file, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Appends one stage record (config snapshot, input/output hashes, wall
/// seconds) to <out_dir>/manifest.json, creating it when absent.
void record_stage(const PipelineConfig& config, const std::string& stage,
                  std::span<const std::filesystem::path> inputs,
                  std::span<const std::filesystem::path> outputs, double seconds);

// ---------------------------------------------------------------------------
// Pipeline stages. Each writes its artifacts under config.out_dir using
// fixed names and records itself in the manifest:
//
//   ingest      dataset.csv classes.txt ingest_report.txt
//   stats       stats.txt
//   split       train.csv validation.csv test.csv
//   augment     balanced.csv balanced.provenance.csv
//   train-gan   gan_class_<c>.ckpt gan_class_<c>_loss.csv
//   train-cgan  cgan.ckpt cgan_loss.csv
//   generate    generated.csv (or --out-file)
//   classify    classifier.ckpt curves.csv
//   evaluate    metrics.json metrics.txt metrics.csv confusion.csv
//   report      comparison.txt comparison.csv
// ---------------------------------------------------------------------------

void run_ingest(const PipelineConfig& config);

/// Histogram (and plan, when a target applies) of a dataset CSV; returns the
/// text it wrote to stats.txt.
std::string run_stats(const PipelineConfig& config,
                      const std::filesystem::path& data_csv);

void run_split(const PipelineConfig& config, const std::filesystem::path& data_csv);

struct AugmentOptions {
  std::string method;  ///< Empty: take config.augmenter.
  /// Train GAN/CGAN models inline. Otherwise `checkpoint` must name a
  /// trained model (a cgan .ckpt file, or for gan the directory holding
  /// per-class gan_class_<c>.ckpt files).
  bool train_inline = false;
  std::filesystem::path checkpoint;
};

void run_augment(const PipelineConfig& config, const std::filesystem::path& data_csv,
                 const AugmentOptions& options);

void run_train_gan(const PipelineConfig& config, const std::filesystem::path& data_csv);
void run_train_cgan(const PipelineConfig& config, const std::filesystem::path& data_csv);

struct GenerateOptions {
  std::filesystem::path checkpoint;
  Index count = 0;
  int label = -1;  ///< Required for conditional checkpoints.
  std::filesystem::path out_file;  ///< Empty: <out_dir>/generated.csv.
};

void run_generate(const PipelineConfig& config, const GenerateOptions& options);

void run_classify(const PipelineConfig& config,
                  const std::filesystem::path& train_csv,
                  const std::filesystem::path& val_csv);

struct EvaluateOptions {
  std::filesystem::path model;     ///< Empty: <out_dir>/classifier.ckpt.
  std::filesystem::path test_csv;  ///< Empty: <out_dir>/test.csv.
  std::string method;              ///< Empty: config.augmenter.
};

void run_evaluate(const PipelineConfig& config, const EvaluateOptions& options);

MetricsReport load_metrics_json(const std::filesystem::path& path);
void save_metrics_json(const std::filesystem::path& path, const MetricsReport& report);

/// Collects metrics.json from each run directory (in the given order) into a
/// comparison table under out_dir, and copies each run's loss/curve CSVs
/// alongside for plotting.
void run_report(const std::filesystem::path& out_dir,
                std::span<const std::filesystem::path> run_dirs);

}  // namespace trafficaug
