#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "siot/learner/preprocess.hpp"
#include "siot/learner/tree.hpp"

namespace siot::learner {

enum class ModelVariant { DecisionTree, RandomForest, GradientBoosting };

std::string_view to_string(ModelVariant v);
/// Accepts "dt"/"rf"/"gbr" and the long names used in model files.
std::optional<ModelVariant> parse_model_variant(std::string_view s);
std::string_view short_name(ModelVariant v);

struct HyperParams {
    int max_depth = kUnboundedDepth;
    int min_samples_leaf = 1;
    int n_trees = 100;
    double feature_fraction = 1.0;
    bool bootstrap = true;
    int n_stages = 100;
    double learning_rate = 0.1;

    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

class RegressionModel {
public:
    RegressionModel() = default;

    ModelVariant variant() const { return variant_; }
    const HyperParams& hyperparams() const { return hp_; }
    const std::vector<Tree>& trees() const { return trees_; }
    double initial_value() const { return init_; }
    const FeatureSchema& schema() const { return schema_; }
    void set_schema(FeatureSchema schema) { schema_ = std::move(schema); }
    /// GBR only: training MSE after each stage (scaled targets).
    const std::vector<double>& stage_train_mse() const { return stage_mse_; }

    /// Prediction on the scaled target for one encoded row.
    double predict(std::span<const double> x) const;
    /// Prediction using only the first `members` trees/stages (ensemble prefix).
    double predict_prefix(std::span<const double> x, std::size_t members) const;
    std::vector<double> predict(const PreparedMatrix& m) const;

    nlohmann::json to_json() const;
    static RegressionModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static RegressionModel load(const std::filesystem::path& path);

private:
    friend RegressionModel train_decision_tree(const PreparedMatrix&, const HyperParams&, std::uint64_t);
    friend RegressionModel train_random_forest(const PreparedMatrix&, const HyperParams&, std::uint64_t);
    friend RegressionModel train_gbr(const PreparedMatrix&, const HyperParams&, std::uint64_t);
    friend class ModelTrainer;

    ModelVariant variant_ = ModelVariant::DecisionTree;
    HyperParams hp_;
    std::vector<Tree> trees_;
    double init_ = 0.0;
    std::vector<double> stage_mse_;
    FeatureSchema schema_;
};

inline constexpr int kModelFormatVersion = 1;

RegressionModel train_decision_tree(const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed);
RegressionModel train_random_forest(const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed);
RegressionModel train_gbr(const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed);
RegressionModel train(ModelVariant v, const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed);

/// Reuses one presorted column store across several fits on the same matrix.
class ModelTrainer {
public:
    explicit ModelTrainer(const PreparedMatrix& m);
    RegressionModel fit(ModelVariant v, const HyperParams& hp, std::uint64_t seed) const;

private:
    const PreparedMatrix& matrix_;
    ColumnStore store_;
};

}  // namespace siot::learner
