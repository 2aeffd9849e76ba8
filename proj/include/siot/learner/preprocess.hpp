#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siot/oracle.hpp"

namespace siot::learner {

/// Raw feature rows before encoding. Numeric and categorical values sit in separate, named columns.
struct FeatureTable {
    std::vector<std::string> numeric_names;
    std::vector<std::string> categorical_names;
    std::vector<std::vector<double>> numeric;           // [row][numeric column]
    std::vector<std::vector<std::string>> categorical;  // [row][categorical column]
    std::vector<std::optional<double>> targets;         // nullopt = unavailable

    std::size_t size() const { return numeric.size(); }
};

/// Requester/edge/task features of a sharing experience, in a fixed column order.
FeatureTable experience_table(std::span<const SharingExperience> rows);

/// Single unlabeled row for the same columns (used at allocation time).
FeatureTable experience_features(const SharingExperience& row);

enum class FeatureKind { Numeric, Categorical };

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::Numeric;
    std::vector<std::string> vocabulary;  // sorted, categorical only
    double min = 0.0;
    double max = 1.0;
};

struct FeatureSchema {
    std::vector<FeatureDescriptor> features;
    double target_min = 0.0;
    double target_max = 1.0;
    std::vector<std::string> dropped;   // constant numeric features
    std::vector<std::string> warnings;

    std::vector<std::string> column_names() const;
    std::size_t column_count() const;

    double scale_target(double seconds) const;
    double unscale_target(double scaled) const;
};

/// Min/max and vocabularies from rows with finite targets. Throws EmptyTraining with fewer than 2 such rows.
FeatureSchema fit_preprocessor(const FeatureTable& table);

/// Row-major encoded features in [0, 1] and min-max scaled targets.
struct PreparedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> x;
    std::vector<std::string> columns;
    std::vector<double> y;
    std::size_t excluded = 0;  // rows dropped for lacking a finite target
    double target_min = 0.0;
    double target_max = 1.0;

    std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
    double unscale(double scaled) const { return target_min + scaled * (target_max - target_min); }

    /// Subset of rows, in the given order.
    PreparedMatrix select(std::span<const std::size_t> idx) const;
};

/// Encodes rows with finite targets. Throws SchemaMismatch when a schema feature is missing from `table`.
PreparedMatrix transform(const FeatureSchema& schema, const FeatureTable& table);

/// Encodes every row of `table` regardless of target (no y).
std::vector<double> encode_features(const FeatureSchema& schema, const FeatureTable& table);

}  // namespace siot::learner
