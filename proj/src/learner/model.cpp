#include "siot/learner/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "siot/error.hpp"
#include "siot/rng.hpp"

namespace siot::learner {

std::string_view to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::DecisionTree: return "decision_tree";
        case ModelVariant::RandomForest: return "random_forest";
        case ModelVariant::GradientBoosting: return "gradient_boosting";
    }
    return "?";
}

std::string_view short_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::DecisionTree: return "dt";
        case ModelVariant::RandomForest: return "rf";
        case ModelVariant::GradientBoosting: return "gbr";
    }
    return "?";
}

std::optional<ModelVariant> parse_model_variant(std::string_view s) {
    for (auto v : {ModelVariant::DecisionTree, ModelVariant::RandomForest, ModelVariant::GradientBoosting}) {
        if (s == to_string(v) || s == short_name(v)) return v;
    }
    return std::nullopt;
}

double RegressionModel::predict_prefix(std::span<const double> x, std::size_t members) const {
    members = std::min(members, trees_.size());
    switch (variant_) {
        case ModelVariant::DecisionTree:
            return trees_.front().predict(x);
        case ModelVariant::RandomForest: {
            double s = 0.0;
            for (std::size_t i = 0; i < members; ++i) s += trees_[i].predict(x);
            return s / static_cast<double>(members);
        }
        case ModelVariant::GradientBoosting: {
            double f = init_;
            for (std::size_t i = 0; i < members; ++i) f += hp_.learning_rate * trees_[i].predict(x);
            return f;
        }
    }
    return 0.0;
}

double RegressionModel::predict(std::span<const double> x) const { return predict_prefix(x, trees_.size()); }

std::vector<double> RegressionModel::predict(const PreparedMatrix& m) const {
    if (m.cols != schema_.column_count() && !schema_.features.empty()) {
        throw Error(ErrorCode::SchemaMismatch,
                    fmt::format("matrix has {} columns, model expects {}", m.cols, schema_.column_count()));
    }
    std::vector<double> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) out[i] = predict(m.row(i));
    return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

TreeParams tree_params(const HyperParams& hp, double feature_fraction) {
    return {hp.max_depth, std::max(1, hp.min_samples_leaf), feature_fraction};
}

void check_training(const PreparedMatrix& m) {
    if (m.rows == 0) throw Error(ErrorCode::EmptyTraining, "training matrix has no rows");
}

}  // namespace

ModelTrainer::ModelTrainer(const PreparedMatrix& m) : matrix_(m), store_(m) {}

RegressionModel ModelTrainer::fit(ModelVariant v, const HyperParams& hp, std::uint64_t seed) const {
    check_training(matrix_);
    RegressionModel model;
    model.variant_ = v;
    model.hp_ = hp;
    const std::span<const double> y(matrix_.y);
    switch (v) {
        case ModelVariant::DecisionTree: {
            model.trees_.push_back(fit_tree(store_, y, {}, tree_params(hp, 1.0), derive_seed(seed, 0)));
            break;
        }
        case ModelVariant::RandomForest: {
            if (hp.n_trees < 1) throw Error(ErrorCode::InvalidParams, "n_trees must be >= 1");
            if (!(hp.feature_fraction > 0.0 && hp.feature_fraction <= 1.0)) {
                throw Error(ErrorCode::InvalidParams, "feature_fraction must lie in (0, 1]");
            }
            std::vector<std::uint32_t> counts;
            for (int t = 0; t < hp.n_trees; ++t) {
                const auto tree_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
                if (hp.bootstrap) {
                    counts.assign(matrix_.rows, 0);
                    Rng boot(derive_seed(tree_seed, "bootstrap"));
                    for (std::size_t i = 0; i < matrix_.rows; ++i) ++counts[uniform_index(boot, matrix_.rows)];
                }
                model.trees_.push_back(fit_tree(store_, y, counts, tree_params(hp, hp.feature_fraction), tree_seed));
            }
            break;
        }
        case ModelVariant::GradientBoosting: {
            if (hp.n_stages < 1) throw Error(ErrorCode::InvalidParams, "n_stages must be >= 1");
            if (!(hp.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidParams, "learning_rate must be >= 0");
            double mean = 0.0;
            for (double t : y) mean += t;
            mean /= static_cast<double>(y.size());
            model.init_ = mean;
            std::vector<double> f(y.size(), mean), residual(y.size()), fitted;
            for (int s = 0; s < hp.n_stages; ++s) {
                for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - f[i];
                model.trees_.push_back(fit_tree(store_, residual, {}, tree_params(hp, 1.0),
                                                derive_seed(seed, static_cast<std::uint64_t>(s)), &fitted));
                double sse = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    f[i] += hp.learning_rate * fitted[i];
                    sse += (y[i] - f[i]) * (y[i] - f[i]);
                }
                const double mse = sse / static_cast<double>(y.size());
                if (!model.stage_mse_.empty() && mse > model.stage_mse_.back() * (1.0 + 1e-9) + 1e-15 &&
                    hp.learning_rate <= 1.0) {
                    throw std::logic_error(fmt::format("gbr training loss rose at stage {}", s));
                }
                model.stage_mse_.push_back(mse);
            }
            break;
        }
    }
    return model;
}

RegressionModel train(ModelVariant v, const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed) {
    check_training(m);
    return ModelTrainer(m).fit(v, hp, seed);
}

RegressionModel train_decision_tree(const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed) {
    return train(ModelVariant::DecisionTree, m, hp, seed);
}

RegressionModel train_random_forest(const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed) {
    return train(ModelVariant::RandomForest, m, hp, seed);
}

RegressionModel train_gbr(const PreparedMatrix& m, const HyperParams& hp, std::uint64_t seed) {
    return train(ModelVariant::GradientBoosting, m, hp, seed);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

json schema_to_json(const FeatureSchema& s) {
    json features = json::array();
    for (const auto& f : s.features) {
        if (f.kind == FeatureKind::Numeric) {
            features.push_back({{"name", f.name}, {"kind", "numeric"}, {"min", f.min}, {"max", f.max}});
        } else {
            features.push_back({{"name", f.name}, {"kind", "categorical"}, {"vocabulary", f.vocabulary}});
        }
    }
    return {{"features", features},
            {"columns", s.column_names()},
            {"target", {{"min", s.target_min}, {"max", s.target_max}}},
            {"dropped", s.dropped},
            {"warnings", s.warnings}};
}

FeatureSchema schema_from_json(const json& j) {
    FeatureSchema s;
    for (const auto& f : j.at("features")) {
        FeatureDescriptor d;
        d.name = f.at("name").get<std::string>();
        if (f.at("kind") == "numeric") {
            d.kind = FeatureKind::Numeric;
            d.min = f.at("min").get<double>();
            d.max = f.at("max").get<double>();
        } else {
            d.kind = FeatureKind::Categorical;
            d.vocabulary = f.at("vocabulary").get<std::vector<std::string>>();
        }
        s.features.push_back(std::move(d));
    }
    s.target_min = j.at("target").at("min").get<double>();
    s.target_max = j.at("target").at("max").get<double>();
    s.dropped = j.value("dropped", std::vector<std::string>{});
    s.warnings = j.value("warnings", std::vector<std::string>{});
    return s;
}

json hp_to_json(const HyperParams& hp) {
    return {{"max_depth", hp.max_depth},         {"min_samples_leaf", hp.min_samples_leaf},
            {"n_trees", hp.n_trees},             {"feature_fraction", hp.feature_fraction},
            {"bootstrap", hp.bootstrap},         {"n_stages", hp.n_stages},
            {"learning_rate", hp.learning_rate}};
}

HyperParams hp_from_json(const json& j) {
    HyperParams hp;
    hp.max_depth = j.at("max_depth").get<int>();
    hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    hp.n_trees = j.at("n_trees").get<int>();
    hp.feature_fraction = j.at("feature_fraction").get<double>();
    hp.bootstrap = j.at("bootstrap").get<bool>();
    hp.n_stages = j.at("n_stages").get<int>();
    hp.learning_rate = j.at("learning_rate").get<double>();
    return hp;
}

json tree_to_json(const Tree& t) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

Tree tree_from_json(const json& j, std::size_t n_cols) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<double>>();
    const auto n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
        throw Error(ErrorCode::MalformedRow, "tree arrays have inconsistent lengths");
    }
    Tree t;
    for (std::size_t i = 0; i < n; ++i) {
        const bool leaf = feature[i] < 0;
        if (!leaf) {
            const auto ok = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
            if (static_cast<std::size_t>(feature[i]) >= n_cols || !ok(left[i]) || !ok(right[i])) {
                throw Error(ErrorCode::MalformedRow, fmt::format("tree node {} references an invalid child or column", i));
            }
        }
        if (!std::isfinite(value[i])) throw Error(ErrorCode::MalformedRow, "non-finite leaf value");
        t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
    }
    return t;
}

}  // namespace

nlohmann::json RegressionModel::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(tree_to_json(t));
    return {{"format", "siot-edge-model"},
            {"version", kModelFormatVersion},
            {"variant", std::string(to_string(variant_))},
            {"hyperparameters", hp_to_json(hp_)},
            {"schema", schema_to_json(schema_)},
            {"ensemble", {{"initial_value", init_}, {"learning_rate", hp_.learning_rate}, {"tree_count", trees_.size()}}},
            {"trees", trees},
            {"training", {{"stage_train_mse", stage_mse_}}}};
}

RegressionModel RegressionModel::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "siot-edge-model") throw Error(ErrorCode::MalformedRow, "not a model file");
    if (j.value("version", 0) != kModelFormatVersion) {
        throw Error(ErrorCode::MalformedRow, fmt::format("unsupported model version {}", j.value("version", 0)));
    }
    RegressionModel m;
    auto variant = parse_model_variant(j.at("variant").get<std::string>());
    if (!variant) throw Error(ErrorCode::MalformedRow, "unknown model variant");
    m.variant_ = *variant;
    m.hp_ = hp_from_json(j.at("hyperparameters"));
    m.schema_ = schema_from_json(j.at("schema"));
    m.init_ = j.at("ensemble").at("initial_value").get<double>();
    // models trained without a schema accept any column count
    const auto cols = m.schema_.features.empty() ? std::numeric_limits<std::size_t>::max() : m.schema_.column_count();
    for (const auto& t : j.at("trees")) m.trees_.push_back(tree_from_json(t, cols));
    if (m.trees_.empty()) throw Error(ErrorCode::MalformedRow, "model has no trees");
    if (j.contains("training")) m.stage_mse_ = j["training"].value("stage_train_mse", std::vector<double>{});
    return m;
}

void RegressionModel::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << to_json().dump() << '\n';
}

RegressionModel RegressionModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open model " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRow, path.string() + ": " + e.what());
    }
}

}  // namespace siot::learner
