#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "siot/learner/preprocess.hpp"

namespace siot::learner {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    /// x[feature] <= threshold goes left.
    double predict(std::span<const double> x) const;
    int depth() const;
};

/// Column-major copy of a matrix with each column's row order presorted by value, shared across fits.
class ColumnStore {
public:
    explicit ColumnStore(const PreparedMatrix& m);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double value(std::size_t col, std::uint32_t row) const { return values_[col * rows_ + row]; }
    const std::vector<std::uint32_t>& order(std::size_t col) const { return order_[col]; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
    std::vector<std::vector<std::uint32_t>> order_;
};

inline constexpr int kUnboundedDepth = -1;

struct TreeParams {
    int max_depth = kUnboundedDepth;
    int min_samples_leaf = 1;
    double feature_fraction = 1.0;
};

/// Greedy variance-reduction CART. `weights` are per-row multiplicities (empty = all ones; 0 = excluded).
/// `seed` drives the per-split feature subsets and the order in which exactly tied splits are resolved.
/// When `fitted` is non-null it receives each included row's leaf value.
Tree fit_tree(const ColumnStore& data, std::span<const double> y, std::span<const std::uint32_t> weights,
              const TreeParams& params, std::uint64_t seed, std::vector<double>* fitted = nullptr);

}  // namespace siot::learner
