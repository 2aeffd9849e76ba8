#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "siot/learner/model.hpp"

namespace siot::learner {

enum class PcdForm {
    Mean,  // (100/N) * sum of per-sample terms; the reported metric
    Sum,   // 100 * sum, without the 1/N factor
};

struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    double pcd = 0.0;
    std::vector<double> per_sample_pcd;
    std::size_t n = 0;
};

/// Per-sample PCD = 100 * |y - yhat| / ((|y| + |yhat|) / 2); 0 when y == yhat.
/// Same as the plain symmetric form for non-negative values, bounded by 200 otherwise.
double sample_pcd(double y, double yhat);

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat,
                              PcdForm form = PcdForm::Mean);

struct ModelEvaluation {
    MetricsReport scaled;   // on min-max scaled targets
    MetricsReport seconds;  // after inverting the target scaling
};

ModelEvaluation evaluate(const RegressionModel& model, const PreparedMatrix& test, PcdForm form = PcdForm::Mean);

nlohmann::json to_json(const MetricsReport& r, bool with_samples = false);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1; the first round(fraction * n) go to train.
SplitIndices split_train_test(std::size_t n, double fraction, std::uint64_t seed);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(std::span<const T> rows, double fraction,
                                                           std::uint64_t seed) {
    auto idx = split_train_test(rows.size(), fraction, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    for (auto i : idx.train) out.first.push_back(rows[i]);
    for (auto i : idx.test) out.second.push_back(rows[i]);
    return out;
}

}  // namespace siot::learner
