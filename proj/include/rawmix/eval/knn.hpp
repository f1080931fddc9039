#pragma once

#include <span>
#include <vector>

namespace rawmix {

using FeatureMatrix = std::vector<std::vector<double>>;

/// Nearest-neighbour labels under Euclidean distance; ties go to the lowest
/// training index. Data error on an empty training set, structure error on
/// mismatched dimensions, contract error for k != 1.
std::vector<int> knn_classify(const FeatureMatrix& train, std::span<const int> train_labels,
                              const FeatureMatrix& test, int k = 1);

/// Index of the nearest training row for one query.
std::size_t nearest_index(const FeatureMatrix& train, std::span<const double> query);

} // namespace rawmix
