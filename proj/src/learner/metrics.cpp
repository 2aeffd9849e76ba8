#include "siot/learner/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>


#include "siot/error.hpp"
#include "siot/rng.hpp"

namespace siot::learner {

double sample_pcd(double y, double yhat) {
    if (y == yhat) return 0.0;
    const double denom = (std::abs(y) + std::abs(yhat)) / 2.0;
    return 100.0 * std::abs(y - yhat) / denom;
}

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat, PcdForm form) {
    if (y.size() != yhat.size()) throw Error(ErrorCode::InvalidParams, "prediction count differs from target count");
    if (y.empty()) throw Error(ErrorCode::EmptyTraining, "metrics over an empty test set");
    MetricsReport r;
    r.n = y.size();
    r.per_sample_pcd.resize(r.n);
    double se = 0.0, ae = 0.0, pcd = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double d = y[i] - yhat[i];
        se += d * d;
        ae += std::abs(d);
        r.per_sample_pcd[i] = sample_pcd(y[i], yhat[i]);
        pcd += r.per_sample_pcd[i];
    }
    const double n = static_cast<double>(r.n);
    r.mse = se / n;
    r.mae = ae / n;
    r.pcd = form == PcdForm::Mean ? pcd / n : pcd;
    return r;
}

ModelEvaluation evaluate(const RegressionModel& model, const PreparedMatrix& test, PcdForm form) {
    const auto pred = model.predict(test);
    ModelEvaluation e;
    e.scaled = compute_metrics(test.y, pred, form);
    std::vector<double> y_s(test.rows), p_s(test.rows);
    for (std::size_t i = 0; i < test.rows; ++i) {
        y_s[i] = test.unscale(test.y[i]);
        p_s[i] = test.unscale(pred[i]);
    }
    e.seconds = compute_metrics(y_s, p_s, form);
    return e;
}

nlohmann::json to_json(const MetricsReport& r, bool with_samples) {
    nlohmann::json j = {{"mse", r.mse}, {"mae", r.mae}, {"pcd", r.pcd}, {"n", r.n}};
    if (with_samples) j["per_sample_pcd"] = r.per_sample_pcd;
    return j;
}

SplitIndices split_train_test(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorCode::InvalidParams, "split fraction must be in (0,1)");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return s;
}

}  // namespace siot::learner
