#pragma once

#include <cstdint>
#include <vector>

#include "trafficaug/dataset.hpp"
#include "trafficaug/types.hpp"

namespace trafficaug {

/// Random oversampling: fills each class's deficit with uniform
/// with-replacement copies of that class's rows. The result contains only
/// the new rows (all marked Synthetic), ordered by class then draw.
LabeledDataset ros_oversample(const LabeledDataset& ds, const BalancePlan& plan,
                              std::uint64_t seed);

/// Indices of the k nearest rows to row `query` under squared Euclidean
/// distance, excluding the query itself. Exact exhaustive search; distance
/// ties resolve to the lower row index. Requires k >= 1 and k < points.rows().
std::vector<Index> knn(const Matrix& points, Index query, int k);

/// One interpolation step: (1 - u) * base + u * neighbor, so u of exactly
/// 0 or 1 reproduces the respective endpoint bit for bit.
Vector smote_interpolate(const Vector& base, const Vector& neighbor, double u);

struct SmoteConfig {
  int k = 5;
};

/// SMOTE: each synthetic row interpolates between a uniformly drawn base row
/// of the class and one of its k nearest same-class neighbours, at a uniform
/// position u in [0, 1]. Every class with a deficit must have more than k
/// rows. The result contains only the new rows, all marked Synthetic.
LabeledDataset smote(const LabeledDataset& ds, const BalancePlan& plan,
                     const SmoteConfig& config, std::uint64_t seed);

}  // namespace trafficaug
