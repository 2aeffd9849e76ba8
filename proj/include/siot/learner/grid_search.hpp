#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "siot/learner/model.hpp"

namespace siot::learner {

/// Candidate values per hyperparameter. Axes a variant does not use are ignored; an empty used axis
/// falls back to the HyperParams default.
struct HyperGrid {
    std::vector<int> max_depth;
    std::vector<int> min_samples_leaf;
    std::vector<int> n_trees;
    std::vector<double> feature_fraction;
    std::vector<bool> bootstrap;
    std::vector<int> n_stages;
    std::vector<double> learning_rate;

    static HyperGrid defaults(ModelVariant v);
};

/// Deduplicated Cartesian product in ascending tuple order. Throws EmptyGrid when no used axis has values.
std::vector<HyperParams> expand_grid(ModelVariant v, const HyperGrid& grid);

/// Lexicographic tuple of the hyperparameters `v` uses; unbounded depth sorts last.
std::vector<double> hp_tuple(ModelVariant v, const HyperParams& hp);

struct CvCell {
    HyperParams hp;
    std::vector<double> fold_pcd;
    double mean_pcd = 0.0;
};

struct GridSearchResult {
    ModelVariant variant = ModelVariant::DecisionTree;
    HyperParams best;
    double best_pcd = 0.0;
    int k_folds = 0;
    std::vector<CvCell> cells;

    nlohmann::json to_json() const;
};

/// k-fold CV over every grid cell; picks the lowest mean fold PCD (seconds), ties to the smallest tuple.
/// Ensembles that differ only in size are trained once at the largest size and scored by prefix.
GridSearchResult grid_search(const PreparedMatrix& m, ModelVariant v, const HyperGrid& grid, int k_folds,
                             std::uint64_t seed);

nlohmann::json to_json(const HyperParams& hp);

}  // namespace siot::learner
