#include "trafficaug/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "trafficaug/preprocess.hpp"
#include "trafficaug/rng.hpp"

namespace trafficaug {

LabeledDataset make_dataset(Matrix pbm, std::vector<int> labels,
                            std::vector<std::string> class_names,
                            std::vector<Provenance> provenance) {
  if (static_cast<std::size_t>(pbm.rows()) != labels.size())
    throw DataError("dataset: " + std::to_string(pbm.rows()) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  if (provenance.empty())
    provenance.assign(labels.size(), Provenance::Real);
  else if (provenance.size() != labels.size())
    throw DataError("dataset: provenance length does not match row count");

  std::unordered_set<std::string> seen;
  for (const std::string& name : class_names)
    if (!seen.insert(name).second)
      throw DataError("dataset: duplicate class name '" + name + "'");

  const int num_classes = static_cast<int>(class_names.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw DataError("dataset: row " + std::to_string(i) + " has label " +
                      std::to_string(labels[i]) + ", outside [0, " +
                      std::to_string(num_classes) + ")");

  if (pbm.size() > 0 && !((pbm.array() >= 0.0).all() && (pbm.array() <= 1.0).all()))
    throw DataError("dataset: matrix entries must lie in [0, 1]");

  return LabeledDataset{std::move(pbm), std::move(labels),
                        std::move(class_names), std::move(provenance)};
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const Index> indices) {
  Matrix pbm(static_cast<Index>(indices.size()), ds.dim());
  std::vector<int> labels(indices.size());
  std::vector<Provenance> prov(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Index r = indices[i];
    if (r < 0 || r >= ds.rows())
      throw DataError("subset: index " + std::to_string(r) + " out of range");
    pbm.row(static_cast<Index>(i)) = ds.pbm.row(r);
    labels[i] = ds.labels[static_cast<std::size_t>(r)];
    prov[i] = ds.provenance[static_cast<std::size_t>(r)];
  }
  return make_dataset(std::move(pbm), std::move(labels), ds.class_names,
                      std::move(prov));
}

std::vector<Index> rows_of_class(const LabeledDataset& ds, int label) {
  std::vector<Index> out;
  for (Index r = 0; r < ds.rows(); ++r)
    if (ds.labels[static_cast<std::size_t>(r)] == label) out.push_back(r);
  return out;
}

ClassDistribution distribution_from_counts(std::span<const std::int64_t> counts) {
  ClassDistribution dist;
  dist.counts.assign(counts.begin(), counts.end());
  dist.total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  dist.percentages.resize(counts.size(), 0.0);
  if (dist.total > 0)
    for (std::size_t c = 0; c < counts.size(); ++c)
      dist.percentages[c] =
          100.0 * static_cast<double>(counts[c]) / static_cast<double>(dist.total);
  return dist;
}

ClassDistribution class_histogram(const LabeledDataset& ds) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(ds.num_classes()), 0);
  for (int label : ds.labels) ++counts[static_cast<std::size_t>(label)];
  return distribution_from_counts(counts);
}

BalancePlan make_balance_plan(const LabeledDataset& ds, std::int64_t uniform_target) {
  const std::vector<std::int64_t> targets(
      static_cast<std::size_t>(ds.num_classes()), uniform_target);
  return make_balance_plan(ds, targets);
}

BalancePlan make_balance_plan(const LabeledDataset& ds,
                              std::span<const std::int64_t> targets) {
  if (targets.size() != static_cast<std::size_t>(ds.num_classes()))
    throw DataError("balance plan: expected one target per class");
  for (std::int64_t t : targets)
    if (t < 0) throw DataError("balance plan: negative target");

  const ClassDistribution dist = class_histogram(ds);
  BalancePlan plan;
  plan.target_per_class.assign(targets.begin(), targets.end());
  plan.deficits.resize(targets.size());
  for (std::size_t c = 0; c < targets.size(); ++c)
    plan.deficits[c] = std::max<std::int64_t>(0, targets[c] - dist.counts[c]);
  return plan;
}

namespace {

/// Splits `m` rows over the three parts: largest-remainder rounding with
/// remainder ties going to the earlier part, then a top-up pass so no part
/// with a positive fraction is left empty (possible for skewed fractions and
/// tiny classes, e.g. 3 rows at 0.8/0.1/0.1).
std::array<std::int64_t, 3> part_sizes(std::int64_t m, const SplitFractions& f) {
  const std::array<double, 3> fracs{f.train, f.validation, f.test};
  std::array<std::int64_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::int64_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double raw = static_cast<double>(m) * fracs[i];
    sizes[i] = static_cast<std::int64_t>(std::floor(raw));
    remainders[i] = raw - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::int64_t left = m - assigned; left > 0; --left)
    ++sizes[order[static_cast<std::size_t>(m - assigned - left)]];

  for (int i = 0; i < 3; ++i) {
    if (fracs[i] <= 0.0 || sizes[i] > 0) continue;
    while (sizes[i] == 0) {
      const int donor = static_cast<int>(
          std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
      if (sizes[donor] <= 1) break;
      --sizes[donor];
      ++sizes[i];
    }
  }
  return sizes;
}

}  // namespace

SplitResult stratified_split(const LabeledDataset& ds, SplitFractions fractions,
                             std::uint64_t seed) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw DataError("split fractions must sum to 1, got " + std::to_string(sum));
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0)
    throw DataError("split fractions must be non-negative");

  const Rng base(seed);
  std::array<std::vector<Index>, 3> part_rows;

  for (int c = 0; c < ds.num_classes(); ++c) {
    std::vector<Index> rows = rows_of_class(ds, c);
    const auto m = static_cast<std::int64_t>(rows.size());
    if (m > 0 && m < 3)
      throw DataError("class '" + ds.class_names[static_cast<std::size_t>(c)] +
                      "' has only " + std::to_string(m) +
                      " rows; a stratified split needs at least 3");
    Rng rng = base.fork("split.class." + std::to_string(c));
    rng.shuffle(rows);

    const auto sizes = part_sizes(m, fractions);
    std::size_t pos = 0;
    for (int p = 0; p < 3; ++p) {
      for (std::int64_t k = 0; k < sizes[static_cast<std::size_t>(p)]; ++k)
        part_rows[static_cast<std::size_t>(p)].push_back(rows[pos++]);
    }
  }

  for (auto& rows : part_rows) std::sort(rows.begin(), rows.end());
  return SplitResult{subset(ds, part_rows[0]), subset(ds, part_rows[1]),
                     subset(ds, part_rows[2])};
}

LabeledDataset merge(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.class_names != b.class_names)
    throw DataError("merge: class tables differ");
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  if (a.dim() != b.dim())
    throw DataError("merge: dimensions differ (" + std::to_string(a.dim()) +
                    " vs " + std::to_string(b.dim()) + ")");

  std::vector<int> labels = a.labels;
  labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  std::vector<Provenance> prov = a.provenance;
  prov.insert(prov.end(), b.provenance.begin(), b.provenance.end());
  return make_dataset(vcat(a.pbm, b.pbm), std::move(labels), a.class_names,
                      std::move(prov));
}

LabeledDataset downsample_to_plan(const LabeledDataset& ds, const BalancePlan& plan,
                                  std::uint64_t seed) {
  if (plan.target_per_class.size() != static_cast<std::size_t>(ds.num_classes()))
    throw DataError("downsample: plan does not match dataset class count");

  const Rng base(seed);
  std::vector<bool> keep(static_cast<std::size_t>(ds.rows()), true);
  for (int c = 0; c < ds.num_classes(); ++c) {
    std::vector<Index> rows = rows_of_class(ds, c);
    const std::int64_t target = plan.target_per_class[static_cast<std::size_t>(c)];
    if (static_cast<std::int64_t>(rows.size()) <= target) continue;
    Rng rng = base.fork("downsample.class." + std::to_string(c));
    rng.shuffle(rows);
    for (std::size_t i = static_cast<std::size_t>(target); i < rows.size(); ++i)
      keep[static_cast<std::size_t>(rows[i])] = false;
  }

  std::vector<Index> kept;
  for (Index r = 0; r < ds.rows(); ++r)
    if (keep[static_cast<std::size_t>(r)]) kept.push_back(r);
  return subset(ds, kept);
}

Matrix one_hot(std::span<const int> labels, int num_classes) {
  if (num_classes <= 0) throw DataError("one_hot: num_classes must be positive");
  Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw DataError("one_hot: label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    out(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return out;
}

void write_class_names(const std::filesystem::path& path,
                       std::span<const std::string> names) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  for (const std::string& name : names) out << name << "\n";
}

std::vector<std::string> read_class_names(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open class-name file: " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

void write_provenance(const std::filesystem::path& path,
                      std::span<const Provenance> provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  for (Provenance p : provenance)
    out << (p == Provenance::Real ? "real\n" : "synthetic\n");
}

std::vector<Provenance> read_provenance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open provenance file: " + path.string());
  std::vector<Provenance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "real")
      out.push_back(Provenance::Real);
    else if (line == "synthetic")
      out.push_back(Provenance::Synthetic);
    else
      throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                           ": expected 'real' or 'synthetic'",
                       static_cast<long long>(line_no));
  }
  return out;
}

LabeledDataset load_dataset(const std::filesystem::path& csv_path,
                            const std::filesystem::path& classes_path) {
  CsvData csv = read_csv_file(csv_path);
  std::vector<std::string> names = read_class_names(classes_path);
  return make_dataset(std::move(csv.pbm), std::move(csv.labels), std::move(names));
}

void save_dataset(const std::filesystem::path& csv_path,
                  const std::filesystem::path& classes_path,
                  const LabeledDataset& ds) {
  write_csv_file(csv_path, ds.pbm, ds.labels);
  write_class_names(classes_path, ds.class_names);
}

}  // namespace trafficaug
