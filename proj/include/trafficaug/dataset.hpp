#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trafficaug/types.hpp"

namespace trafficaug {

/// Where a row came from. Augmenters mark everything they emit as Synthetic,
/// including plain copies.
enum class Provenance : std::uint8_t { Real, Synthetic };

/// An N x D matrix of values in [0, 1] with one class label per row and a
/// shared class-name table. Construct through `make_dataset` so the
/// invariants (label range, matching lengths, value range) hold everywhere.
struct LabeledDataset {
  Matrix pbm;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<Provenance> provenance;

  Index rows() const { return pbm.rows(); }
  Index dim() const { return pbm.cols(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

LabeledDataset make_dataset(Matrix pbm, std::vector<int> labels,
                            std::vector<std::string> class_names,
                            std::vector<Provenance> provenance = {});

/// Extracts the rows at `indices`, preserving order.
LabeledDataset subset(const LabeledDataset& ds, std::span<const Index> indices);

/// Row indices of one class, ascending.
std::vector<Index> rows_of_class(const LabeledDataset& ds, int label);

struct ClassDistribution {
  std::vector<std::int64_t> counts;       ///< Per class, index == label.
  std::vector<double> percentages;        ///< counts / total * 100; 0 if empty.
  std::int64_t total = 0;
};

ClassDistribution distribution_from_counts(std::span<const std::int64_t> counts);
ClassDistribution class_histogram(const LabeledDataset& ds);

/// Targets and per-class shortfalls for a balancing pass.
/// deficits[c] == max(0, target_per_class[c] - count[c]).
struct BalancePlan {
  std::vector<std::int64_t> target_per_class;
  std::vector<std::int64_t> deficits;
};

BalancePlan make_balance_plan(const LabeledDataset& ds, std::int64_t uniform_target);
BalancePlan make_balance_plan(const LabeledDataset& ds,
                              std::span<const std::int64_t> targets);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitResult {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

/// Splits per class so each part's class mix mirrors the whole. Within a
/// class the fractional part sizes are settled by largest-remainder rounding
/// (remainder ties go to the earlier part: train, then validation, then
/// test), rows are assigned by a seeded shuffle, and original row order is
/// kept inside each part. Every class needs at least 3 rows.
SplitResult stratified_split(const LabeledDataset& ds, SplitFractions fractions,
                             std::uint64_t seed);

/// Concatenates two datasets over the same dimension and class table.
LabeledDataset merge(const LabeledDataset& a, const LabeledDataset& b);

/// Uniformly downsamples (without replacement) every class above its target.
/// Classes at or below target pass through untouched. Row order is preserved.
LabeledDataset downsample_to_plan(const LabeledDataset& ds, const BalancePlan& plan,
                                  std::uint64_t seed);

/// One-hot rows: out(i, labels[i]) == 1. Labels must lie in [0, num_classes).
Matrix one_hot(std::span<const int> labels, int num_classes);

// Class-name sidecar files: one name per line, label order.
void write_class_names(const std::filesystem::path& path,
                       std::span<const std::string> names);
std::vector<std::string> read_class_names(const std::filesystem::path& path);

// Provenance sidecar: one "real"/"synthetic" token per row.
void write_provenance(const std::filesystem::path& path,
                      std::span<const Provenance> provenance);
std::vector<Provenance> read_provenance(const std::filesystem::path& path);

/// Dataset from CSV + class-name sidecar (and optional provenance sidecar).
LabeledDataset load_dataset(const std::filesystem::path& csv_path,
                            const std::filesystem::path& classes_path);
void save_dataset(const std::filesystem::path& csv_path,
                  const std::filesystem::path& classes_path,
                  const LabeledDataset& ds);

}  // namespace trafficaug
