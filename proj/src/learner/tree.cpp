#include "siot/learner/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "siot/error.hpp"
#include "siot/rng.hpp"

namespace siot::learner {

double Tree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

int Tree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

ColumnStore::ColumnStore(const PreparedMatrix& m) : rows_(m.rows), cols_(m.cols) {
    values_.resize(rows_ * cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) values_[c * rows_ + r] = m.x[r * cols_ + c];
    }
    order_.resize(cols_);
    for (std::size_t c = 0; c < cols_; ++c) {
        auto& o = order_[c];
        o.resize(rows_);
        std::iota(o.begin(), o.end(), 0u);
        const double* col = values_.data() + c * rows_;
        std::stable_sort(o.begin(), o.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
}

namespace {

class Builder {
public:
    Builder(const ColumnStore& data, std::span<const double> y, std::span<const std::uint32_t> weights,
            const TreeParams& params, std::uint64_t seed, std::vector<double>* fitted)
        : data_(data), y_(y), params_(params), rng_(seed), fitted_(fitted) {
        const std::size_t p = data.cols();
        w_.assign(data.rows(), 1.0);
        if (!weights.empty()) {
            for (std::size_t r = 0; r < data.rows(); ++r) w_[r] = static_cast<double>(weights[r]);
        }
        sorted_.resize(p);
        for (std::size_t c = 0; c < p; ++c) {
            auto& s = sorted_[c];
            s.reserve(data.rows());
            for (auto r : data.order(c)) {
                if (w_[r] > 0.0) s.push_back(r);
            }
        }
        n_ = p > 0 ? sorted_[0].size() : 0;
        if (p == 0) {
            for (std::size_t r = 0; r < data.rows(); ++r) {
                if (w_[r] > 0.0) all_rows_.push_back(static_cast<std::uint32_t>(r));
            }
            n_ = all_rows_.size();
        }
        tie_rank_.resize(p);
        std::iota(tie_rank_.begin(), tie_rank_.end(), std::size_t{0});
        std::shuffle(tie_rank_.begin(), tie_rank_.end(), rng_);
        features_.resize(p);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        const double k = std::ceil(params.feature_fraction * static_cast<double>(p));
        n_candidates_ = std::clamp<std::size_t>(static_cast<std::size_t>(k), p > 0 ? 1 : 0, p);
        go_left_.assign(data.rows(), 0);
        scratch_.resize(n_);
    }

    Tree build() {
        if (n_ == 0) throw Error(ErrorCode::EmptyTraining, "no rows to fit a tree on");
        grow(0, n_, 0);
        return std::move(tree_);
    }

private:
    const std::uint32_t* segment_rows(std::size_t b) const {
        return sorted_.empty() ? all_rows_.data() + b : sorted_[0].data() + b;
    }

    int make_leaf(std::size_t b, std::size_t e, double value) {
        tree_.nodes.push_back({-1, 0.0, -1, -1, value});
        if (fitted_) {
            const auto* rows = segment_rows(b);
            for (std::size_t i = 0; i < e - b; ++i) (*fitted_)[rows[i]] = value;
        }
        return static_cast<int>(tree_.nodes.size() - 1);
    }

    int grow(std::size_t b, std::size_t e, int depth) {
        const auto* rows = segment_rows(b);
        double sw = 0.0, sy = 0.0;
        double ymin = y_[rows[0]], ymax = ymin;
        for (std::size_t i = 0; i < e - b; ++i) {
            const auto r = rows[i];
            sw += w_[r];
            sy += w_[r] * y_[r];
            ymin = std::min(ymin, y_[r]);
            ymax = std::max(ymax, y_[r]);
        }
        const double mean = ymin == ymax ? ymin : std::clamp(sy / sw, ymin, ymax);
        const double msl = static_cast<double>(params_.min_samples_leaf);
        if ((params_.max_depth >= 0 && depth >= params_.max_depth) || ymin == ymax || sw < 2.0 * msl ||
            sorted_.empty()) {
            return make_leaf(b, e, mean);
        }

        // candidate features for this split
        const std::size_t p = features_.size();
        if (n_candidates_ < p) {
            for (std::size_t i = 0; i < n_candidates_; ++i) {
                std::swap(features_[i], features_[i + uniform_index(rng_, p - i)]);
            }
        }

        bool found = false;
        double best_score = 0.0;
        std::size_t best_feature = 0, best_pos = 0;
        double best_threshold = 0.0;
        for (std::size_t fi = 0; fi < n_candidates_; ++fi) {
            const std::size_t f = features_[fi];
            const auto* s = sorted_[f].data();
            double wl = 0.0, syl = 0.0;
            for (std::size_t i = b; i + 1 < e; ++i) {
                const auto r = s[i];
                wl += w_[r];
                syl += w_[r] * y_[r];
                const double v = data_.value(f, r);
                const double next = data_.value(f, s[i + 1]);
                if (!(v < next)) continue;
                const double wr = sw - wl;
                if (wl < msl || wr < msl) continue;
                const double syr = sy - syl;
                const double score = syl * syl / wl + syr * syr / wr;
                const bool better = !found || score > best_score ||
                                    (score == best_score && f != best_feature && tie_rank_[f] < tie_rank_[best_feature]);
                if (better) {
                    found = true;
                    best_score = score;
                    best_feature = f;
                    best_pos = i + 1;
                    double mid = 0.5 * (v + next);
                    if (!(mid < next)) mid = v;
                    best_threshold = mid;
                }
            }
        }
        if (!found) return make_leaf(b, e, mean);

        partition(b, e, best_feature, best_pos);
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back({static_cast<int>(best_feature), best_threshold, -1, -1, mean});
        const int left = grow(b, best_pos, depth + 1);
        const int right = grow(best_pos, e, depth + 1);
        tree_.nodes[static_cast<std::size_t>(id)].left = left;
        tree_.nodes[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    // Every feature's segment [b, e) is stably split into rows going left then rows going right.
    void partition(std::size_t b, std::size_t e, std::size_t split_feature, std::size_t split_pos) {
        const auto& ss = sorted_[split_feature];
        for (std::size_t i = b; i < e; ++i) go_left_[ss[i]] = i < split_pos ? 1 : 0;
        for (std::size_t f = 0; f < sorted_.size(); ++f) {
            if (f == split_feature) continue;
            auto* s = sorted_[f].data();
            std::size_t li = b, ri = 0;
            for (std::size_t i = b; i < e; ++i) {
                const auto r = s[i];
                if (go_left_[r]) {
                    s[li++] = r;
                } else {
                    scratch_[ri++] = r;
                }
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(ri), s + li);
        }
    }

    const ColumnStore& data_;
    std::span<const double> y_;
    TreeParams params_;
    Rng rng_;
    std::vector<double>* fitted_;
    std::vector<double> w_;
    std::vector<std::vector<std::uint32_t>> sorted_;
    std::vector<std::uint32_t> all_rows_;
    std::size_t n_ = 0;
    std::vector<std::size_t> tie_rank_;
    std::vector<std::size_t> features_;
    std::size_t n_candidates_ = 0;
    std::vector<char> go_left_;
    std::vector<std::uint32_t> scratch_;
    Tree tree_;
};

}  // namespace

Tree fit_tree(const ColumnStore& data, std::span<const double> y, std::span<const std::uint32_t> weights,
              const TreeParams& params, std::uint64_t seed, std::vector<double>* fitted) {
    if (y.size() != data.rows()) throw Error(ErrorCode::InvalidParams, "target length differs from row count");
    if (!weights.empty() && weights.size() != data.rows()) {
        throw Error(ErrorCode::InvalidParams, "weight length differs from row count");
    }
    if (fitted) fitted->assign(data.rows(), 0.0);
    Builder builder(data, y, weights, params, seed, fitted);
    return builder.build();
}

}  // namespace siot::learner
