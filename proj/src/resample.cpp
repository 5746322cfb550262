#include "trafficaug/resample.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "trafficaug/rng.hpp"

namespace trafficaug {

LabeledDataset ros_oversample(const LabeledDataset& ds, const BalancePlan& plan,
                              std::uint64_t seed) {
  if (plan.deficits.size() != static_cast<std::size_t>(ds.num_classes()))
    throw DataError("ros: plan does not match dataset class count");

  const std::int64_t total =
      std::accumulate(plan.deficits.begin(), plan.deficits.end(), std::int64_t{0});
  Matrix pbm(static_cast<Index>(total), ds.dim());
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));

  const Rng base(seed);
  Index next = 0;
  for (int c = 0; c < ds.num_classes(); ++c) {
    const std::int64_t deficit = plan.deficits[static_cast<std::size_t>(c)];
    if (deficit == 0) continue;
    const std::vector<Index> rows = rows_of_class(ds, c);
    if (rows.empty())
      throw DataError("ros: class '" + ds.class_names[static_cast<std::size_t>(c)] +
                      "' has a deficit but no rows to copy");
    Rng rng = base.fork("ros.class." + std::to_string(c));
    for (std::int64_t i = 0; i < deficit; ++i) {
      const Index pick = rows[rng.uniform_below(rows.size())];
      pbm.row(next++) = ds.pbm.row(pick);
      labels.push_back(c);
    }
  }

  std::vector<Provenance> provenance(labels.size(), Provenance::Synthetic);
  return make_dataset(std::move(pbm), std::move(labels), ds.class_names,
                      std::move(provenance));
}

std::vector<Index> knn(const Matrix& points, Index query, int k) {
  const Index n = points.rows();
  if (query < 0 || query >= n) throw DataError("knn: query index out of range");
  if (k < 1 || static_cast<Index>(k) >= n)
    throw DataError("knn: k must satisfy 1 <= k < number of points, got k=" +
                    std::to_string(k) + " with " + std::to_string(n) + " points");

  std::vector<std::pair<double, Index>> dist;
  dist.reserve(static_cast<std::size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    if (i == query) continue;
    dist.emplace_back((points.row(i) - points.row(query)).squaredNorm(), i);
  }
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  std::vector<Index> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
  return out;
}

Vector smote_interpolate(const Vector& base, const Vector& neighbor, double u) {
  return (1.0 - u) * base + u * neighbor;
}

LabeledDataset smote(const LabeledDataset& ds, const BalancePlan& plan,
                     const SmoteConfig& config, std::uint64_t seed) {
  if (plan.deficits.size() != static_cast<std::size_t>(ds.num_classes()))
    throw DataError("smote: plan does not match dataset class count");
  if (config.k < 1) throw DataError("smote: k must be at least 1");

  const std::int64_t total =
      std::accumulate(plan.deficits.begin(), plan.deficits.end(), std::int64_t{0});
  Matrix pbm(static_cast<Index>(total), ds.dim());
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));

  const Rng base_rng(seed);
  Index next = 0;
  for (int c = 0; c < ds.num_classes(); ++c) {
    const std::int64_t deficit = plan.deficits[static_cast<std::size_t>(c)];
    if (deficit == 0) continue;
    const std::vector<Index> rows = rows_of_class(ds, c);
    if (static_cast<std::int64_t>(rows.size()) <= config.k)
      throw DataError("smote: class '" + ds.class_names[static_cast<std::size_t>(c)] +
                      "' has " + std::to_string(rows.size()) +
                      " rows, but k=" + std::to_string(config.k) +
                      " needs more rows than neighbours");

    Matrix cls(static_cast<Index>(rows.size()), ds.dim());
    for (std::size_t i = 0; i < rows.size(); ++i)
      cls.row(static_cast<Index>(i)) = ds.pbm.row(rows[i]);

    // Neighbour lists are fixed per class, so compute them once per base row
    // on demand and cache.
    std::vector<std::vector<Index>> neighbor_cache(rows.size());
    Rng rng = base_rng.fork("smote.class." + std::to_string(c));
    for (std::int64_t i = 0; i < deficit; ++i) {
      const auto pick = static_cast<std::size_t>(rng.uniform_below(rows.size()));
      if (neighbor_cache[pick].empty())
        neighbor_cache[pick] = knn(cls, static_cast<Index>(pick), config.k);
      const auto& neighbors = neighbor_cache[pick];
      const Index nn = neighbors[rng.uniform_below(neighbors.size())];
      const double u = rng.uniform01();
      pbm.row(next++) = smote_interpolate(cls.row(static_cast<Index>(pick)).transpose(),
                                          cls.row(nn).transpose(), u)
                            .transpose();
      labels.push_back(c);
    }
  }

  std::vector<Provenance> provenance(labels.size(), Provenance::Synthetic);
  return make_dataset(std::move(pbm), std::move(labels), ds.class_names,
                      std::move(provenance));
}

}  // namespace trafficaug
