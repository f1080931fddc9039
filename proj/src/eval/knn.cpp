#include "rawmix/eval/knn.hpp"

#include "rawmix/error.hpp"
#include "rawmix/kernels/kernels.hpp"

#include <limits>
#include <string>

namespace rawmix {

std::size_t nearest_index(const FeatureMatrix& train, std::span<const double> query)
{
    if (train.empty())
        fail(ErrorKind::data, "1-NN needs a non-empty training set");
    const auto& k = kernels::active();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i].size() != query.size())
            fail(ErrorKind::structure, "feature dims differ: train " + std::to_string(train[i].size()) +
                                           ", query " + std::to_string(query.size()));
        const double d = k.squared_distance(train[i].data(), query.data(), query.size());
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<int> knn_classify(const FeatureMatrix& train, std::span<const int> train_labels,
                              const FeatureMatrix& test, int k)
{
    if (k != 1)
        fail(ErrorKind::contract, "only k = 1 is supported, got " + std::to_string(k));
    if (train.empty())
        fail(ErrorKind::data, "1-NN needs a non-empty training set");
    if (train_labels.size() != train.size())
        fail(ErrorKind::structure, std::to_string(train.size()) + " training features but " +
                                       std::to_string(train_labels.size()) + " labels");
    std::vector<int> out;
    out.reserve(test.size());
    for (const auto& q : test)
        out.push_back(train_labels[nearest_index(train, q)]);
    return out;
}

} // namespace rawmix
