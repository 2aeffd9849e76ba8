#include "siot/learner/grid_search.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "siot/error.hpp"
#include "siot/learner/metrics.hpp"
#include "siot/rng.hpp"

namespace siot::learner {

HyperGrid HyperGrid::defaults(ModelVariant v) {
    HyperGrid g;
    switch (v) {
        case ModelVariant::DecisionTree:
            g.max_depth = {4, 8, 16, kUnboundedDepth};
            g.min_samples_leaf = {1, 5, 20};
            break;
        case ModelVariant::RandomForest:
            g.n_trees = {50, 100, 200};
            g.feature_fraction = {0.33, 0.5, 1.0};
            g.max_depth = {8, 16, kUnboundedDepth};
            break;
        case ModelVariant::GradientBoosting:
            g.n_stages = {100, 300};
            g.learning_rate = {0.05, 0.1, 0.2};
            g.max_depth = {2, 3, 4};
            break;
    }
    return g;
}

namespace {

template <typename T>
std::vector<T> axis(const std::vector<T>& values, T fallback) {
    return values.empty() ? std::vector<T>{fallback} : values;
}

double depth_key(int d) { return d < 0 ? std::numeric_limits<double>::infinity() : d; }

bool uses_axes(ModelVariant v, const HyperGrid& g) {
    const bool shared = !g.max_depth.empty() || !g.min_samples_leaf.empty();
    switch (v) {
        case ModelVariant::DecisionTree: return shared;
        case ModelVariant::RandomForest:
            return shared || !g.n_trees.empty() || !g.feature_fraction.empty() || !g.bootstrap.empty();
        case ModelVariant::GradientBoosting: return shared || !g.n_stages.empty() || !g.learning_rate.empty();
    }
    return false;
}

}  // namespace

std::vector<double> hp_tuple(ModelVariant v, const HyperParams& hp) {
    switch (v) {
        case ModelVariant::DecisionTree: return {depth_key(hp.max_depth), double(hp.min_samples_leaf)};
        case ModelVariant::RandomForest:
            return {double(hp.n_trees), hp.feature_fraction, depth_key(hp.max_depth), double(hp.min_samples_leaf),
                    hp.bootstrap ? 1.0 : 0.0};
        case ModelVariant::GradientBoosting:
            return {double(hp.n_stages), hp.learning_rate, depth_key(hp.max_depth), double(hp.min_samples_leaf)};
    }
    return {};
}

std::vector<HyperParams> expand_grid(ModelVariant v, const HyperGrid& grid) {
    if (!uses_axes(v, grid)) throw Error(ErrorCode::EmptyGrid, fmt::format("no values for {}", to_string(v)));
    const HyperParams base;
    std::vector<HyperParams> out;
    for (int depth : axis(grid.max_depth, base.max_depth)) {
        for (int leaf : axis(grid.min_samples_leaf, base.min_samples_leaf)) {
            HyperParams hp = base;
            hp.max_depth = depth;
            hp.min_samples_leaf = leaf;
            if (v == ModelVariant::DecisionTree) {
                out.push_back(hp);
            } else if (v == ModelVariant::RandomForest) {
                for (int n : axis(grid.n_trees, base.n_trees)) {
                    for (double ff : axis(grid.feature_fraction, base.feature_fraction)) {
                        for (bool boot : axis(grid.bootstrap, base.bootstrap)) {
                            hp.n_trees = n;
                            hp.feature_fraction = ff;
                            hp.bootstrap = boot;
                            out.push_back(hp);
                        }
                    }
                }
            } else {
                for (int n : axis(grid.n_stages, base.n_stages)) {
                    for (double lr : axis(grid.learning_rate, base.learning_rate)) {
                        hp.n_stages = n;
                        hp.learning_rate = lr;
                        out.push_back(hp);
                    }
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [v](const auto& a, const auto& b) { return hp_tuple(v, a) < hp_tuple(v, b); });
    out.erase(std::unique(out.begin(), out.end(), [v](const auto& a, const auto& b) {
                  return hp_tuple(v, a) == hp_tuple(v, b);
              }),
              out.end());
    return out;
}

namespace {

int& ensemble_size(ModelVariant v, HyperParams& hp) {
    return v == ModelVariant::RandomForest ? hp.n_trees : hp.n_stages;
}

}  // namespace

GridSearchResult grid_search(const PreparedMatrix& m, ModelVariant v, const HyperGrid& grid, int k_folds,
                             std::uint64_t seed) {
    if (k_folds < 2) throw Error(ErrorCode::InvalidParams, "k_folds must be >= 2");
    if (m.rows < static_cast<std::size_t>(k_folds)) {
        throw Error(ErrorCode::EmptyTraining, fmt::format("{} rows cannot fill {} folds", m.rows, k_folds));
    }
    const auto cells = expand_grid(v, grid);

    std::vector<std::size_t> perm(m.rows);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "folds"));
    std::shuffle(perm.begin(), perm.end(), rng);

    GridSearchResult result;
    result.variant = v;
    result.k_folds = k_folds;
    for (const auto& hp : cells) result.cells.push_back({hp, {}, 0.0});

    // Group cells that differ only in ensemble size; each group is trained once at its largest size.
    std::map<std::vector<double>, std::vector<std::size_t>> groups;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        HyperParams key = cells[c];
        if (v != ModelVariant::DecisionTree) ensemble_size(v, key) = 0;
        groups[hp_tuple(v, key)].push_back(c);
    }

    for (int fold = 0; fold < k_folds; ++fold) {
        std::vector<std::size_t> train_idx, held_idx;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            (static_cast<int>(i % static_cast<std::size_t>(k_folds)) == fold ? held_idx : train_idx).push_back(perm[i]);
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(held_idx.begin(), held_idx.end());
        const auto train_m = m.select(train_idx);
        const auto held_m = m.select(held_idx);
        const ModelTrainer trainer(train_m);
        std::vector<double> truth(held_m.rows);
        for (std::size_t i = 0; i < held_m.rows; ++i) truth[i] = held_m.unscale(held_m.y[i]);
        const auto fit_seed = derive_seed(seed, static_cast<std::uint64_t>(fold));

        for (const auto& [key, members] : groups) {
            HyperParams hp = result.cells[members.front()].hp;
            if (v != ModelVariant::DecisionTree) {
                int largest = 0;
                for (auto c : members) largest = std::max(largest, ensemble_size(v, result.cells[c].hp));
                ensemble_size(v, hp) = largest;
            }
            const auto model = trainer.fit(v, hp, fit_seed);
            for (auto c : members) {
                auto& cell = result.cells[c];
                const auto size = v == ModelVariant::DecisionTree
                                      ? std::size_t{1}
                                      : static_cast<std::size_t>(ensemble_size(v, cell.hp));
                std::vector<double> pred(held_m.rows);
                for (std::size_t i = 0; i < held_m.rows; ++i) {
                    pred[i] = held_m.unscale(model.predict_prefix(held_m.row(i), size));
                }
                cell.fold_pcd.push_back(compute_metrics(truth, pred).pcd);
            }
        }
    }

    bool first = true;
    for (auto& cell : result.cells) {
        cell.mean_pcd = std::accumulate(cell.fold_pcd.begin(), cell.fold_pcd.end(), 0.0) / k_folds;
        // cells are in ascending tuple order, so strict < keeps the smallest tuple on ties
        if (first || cell.mean_pcd < result.best_pcd) {
            result.best = cell.hp;
            result.best_pcd = cell.mean_pcd;
            first = false;
        }
    }
    return result;
}

nlohmann::json to_json(const HyperParams& hp) {
    return {{"max_depth", hp.max_depth},         {"min_samples_leaf", hp.min_samples_leaf},
            {"n_trees", hp.n_trees},             {"feature_fraction", hp.feature_fraction},
            {"bootstrap", hp.bootstrap},         {"n_stages", hp.n_stages},
            {"learning_rate", hp.learning_rate}};
}

nlohmann::json GridSearchResult::to_json() const {
    nlohmann::json cells_j = nlohmann::json::array();
    for (const auto& c : cells) {
        cells_j.push_back({{"hyperparameters", learner::to_json(c.hp)}, {"fold_pcd", c.fold_pcd}, {"mean_pcd", c.mean_pcd}});
    }
    return {{"variant", std::string(to_string(variant))},
            {"k_folds", k_folds},
            {"best", learner::to_json(best)},
            {"best_mean_pcd", best_pcd},
            {"cells", cells_j}};
}

}  // namespace siot::learner
