#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <numeric>
#include <vector>

namespace dcovsel {

/// k-nearest-neighbour majority vote under Euclidean distance. Distance ties
/// are resolved by training index, vote ties by the smallest label.
inline std::vector<int> knn_classify(const Eigen::MatrixXd& train, const std::vector<int>& labels,
                                     const Eigen::MatrixXd& test, std::size_t k = 3)
{
    if (train.rows() == 0) {
        throw ArgumentError("k-NN needs a non-empty training set");
    }
    if (static_cast<std::size_t>(train.rows()) != labels.size()) {
        throw DimensionError("k-NN label count does not match training rows");
    }
    if (train.cols() != test.cols()) {
        throw DimensionError("k-NN training and test sets have different column counts");
    }
    if (k < 1 || k > labels.size()) {
        throw ArgumentError("k-NN needs 1 <= k <= training size");
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(test.rows()));
    std::vector<std::size_t> order(labels.size());
    std::vector<double> dist(labels.size());
    for (Eigen::Index t = 0; t < test.rows(); ++t) {
        for (Eigen::Index i = 0; i < train.rows(); ++i) {
            dist[static_cast<std::size_t>(i)] = (train.row(i) - test.row(t)).squaredNorm();
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
        std::map<int, std::size_t> votes;
        for (std::size_t j = 0; j < k; ++j) {
            ++votes[labels[order[j]]];
        }
        int best = votes.begin()->first;
        std::size_t best_count = 0;
        for (const auto& [label, count] : votes) {
            if (count > best_count) {
                best = label;
                best_count = count;
            }
        }
        out.push_back(best);
    }
    return out;
}

} // namespace dcovsel
