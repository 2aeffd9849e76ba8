#include "siot/learner/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "siot/error.hpp"

namespace siot::learner {

namespace {

const std::vector<std::string> kNumeric = {
    "requester_lat", "requester_lon", "instruction_count_mi", "message_size_mb", "edge_lat",
    "edge_lon",      "edge_cpi",      "edge_clock_rate_ghz",  "edge_ram_gb",     "edge_cores",
    "edge_availability_pct",
};
const std::vector<std::string> kCategorical = {"requester_type", "edge_type", "edge_mode", "edge_mobility", "tech"};

void append(FeatureTable& t, const SharingExperience& e) {
    t.numeric.push_back({e.requester_lat, e.requester_lon, e.instruction_count_mi, e.message_size_mb, e.edge_lat,
                         e.edge_lon, e.edge_cpi, e.edge_clock_rate_ghz, e.edge_ram_gb,
                         static_cast<double>(e.edge_cores), e.edge_availability_pct});
    t.categorical.push_back({std::string(to_string(e.requester_type)), std::string(to_string(e.edge_type)),
                             std::string(to_string(e.edge_mode)), std::string(to_string(e.edge_mobility)),
                             std::string(to_string(e.tech))});
    t.targets.push_back(e.observed_rt);
}

std::size_t column_index(const std::vector<std::string>& names, const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorCode::SchemaMismatch, fmt::format("feature '{}' missing", name));
    return static_cast<std::size_t>(it - names.begin());
}

bool finite_target(const std::optional<double>& t) { return t.has_value() && std::isfinite(*t); }

}  // namespace

FeatureTable experience_table(std::span<const SharingExperience> rows) {
    FeatureTable t;
    t.numeric_names = kNumeric;
    t.categorical_names = kCategorical;
    for (const auto& e : rows) append(t, e);
    return t;
}

FeatureTable experience_features(const SharingExperience& row) {
    return experience_table(std::span<const SharingExperience>(&row, 1));
}

std::vector<std::string> FeatureSchema::column_names() const {
    std::vector<std::string> out;
    for (const auto& f : features) {
        if (f.kind == FeatureKind::Numeric) {
            out.push_back(f.name);
        } else {
            for (const auto& v : f.vocabulary) out.push_back(f.name + "=" + v);
        }
    }
    return out;
}

std::size_t FeatureSchema::column_count() const {
    std::size_t n = 0;
    for (const auto& f : features) n += f.kind == FeatureKind::Numeric ? 1 : f.vocabulary.size();
    return n;
}

double FeatureSchema::scale_target(double seconds) const {
    const double range = target_max - target_min;
    return range > 0.0 ? (seconds - target_min) / range : seconds - target_min;
}

double FeatureSchema::unscale_target(double scaled) const {
    const double range = target_max - target_min;
    return target_min + scaled * (range > 0.0 ? range : 1.0);
}

FeatureSchema fit_preprocessor(const FeatureTable& table) {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (finite_target(table.targets[i])) usable.push_back(i);
    }
    if (usable.size() < 2) throw Error(ErrorCode::EmptyTraining, "need at least 2 rows with finite targets");

    FeatureSchema s;
    s.target_min = s.target_max = *table.targets[usable.front()];
    for (auto i : usable) {
        s.target_min = std::min(s.target_min, *table.targets[i]);
        s.target_max = std::max(s.target_max, *table.targets[i]);
    }
    if (!(s.target_max > s.target_min)) s.warnings.push_back("constant target; scaling is a shift only");

    for (std::size_t c = 0; c < table.numeric_names.size(); ++c) {
        double lo = table.numeric[usable.front()][c], hi = lo;
        for (auto i : usable) {
            lo = std::min(lo, table.numeric[i][c]);
            hi = std::max(hi, table.numeric[i][c]);
        }
        if (!(hi > lo)) {
            s.dropped.push_back(table.numeric_names[c]);
            s.warnings.push_back(fmt::format("DegenerateFeature: '{}' is constant ({}) and was dropped",
                                             table.numeric_names[c], lo));
            continue;
        }
        s.features.push_back({table.numeric_names[c], FeatureKind::Numeric, {}, lo, hi});
    }
    for (std::size_t c = 0; c < table.categorical_names.size(); ++c) {
        std::set<std::string> vocab;
        for (auto i : usable) vocab.insert(table.categorical[i][c]);
        s.features.push_back(
            {table.categorical_names[c], FeatureKind::Categorical, {vocab.begin(), vocab.end()}, 0.0, 0.0});
    }
    return s;
}

namespace {

struct Encoder {
    struct Slot {
        bool numeric;
        std::size_t source;  // column in the FeatureTable
        const FeatureDescriptor* desc;
    };
    std::vector<Slot> slots;
    std::size_t cols = 0;

    Encoder(const FeatureSchema& schema, const FeatureTable& table) {
        for (const auto& f : schema.features) {
            if (f.kind == FeatureKind::Numeric) {
                slots.push_back({true, column_index(table.numeric_names, f.name), &f});
                ++cols;
            } else {
                slots.push_back({false, column_index(table.categorical_names, f.name), &f});
                cols += f.vocabulary.size();
            }
        }
    }

    void encode(const FeatureTable& table, std::size_t row, double* out) const {
        for (const auto& s : slots) {
            if (s.numeric) {
                const double v = (table.numeric[row][s.source] - s.desc->min) / (s.desc->max - s.desc->min);
                *out++ = std::clamp(v, 0.0, 1.0);
            } else {
                const auto& vocab = s.desc->vocabulary;
                const auto& value = table.categorical[row][s.source];
                auto it = std::lower_bound(vocab.begin(), vocab.end(), value);
                const bool seen = it != vocab.end() && *it == value;
                for (std::size_t k = 0; k < vocab.size(); ++k) {
                    *out++ = seen && static_cast<std::size_t>(it - vocab.begin()) == k ? 1.0 : 0.0;
                }
            }
        }
    }
};

}  // namespace

PreparedMatrix transform(const FeatureSchema& schema, const FeatureTable& table) {
    const Encoder enc(schema, table);
    PreparedMatrix m;
    m.cols = enc.cols;
    m.columns = schema.column_names();
    m.target_min = schema.target_min;
    m.target_max = schema.target_max;
    if (!(m.target_max > m.target_min)) m.target_max = m.target_min + 1.0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (!finite_target(table.targets[i])) {
            ++m.excluded;
            continue;
        }
        m.x.resize((m.rows + 1) * m.cols);
        enc.encode(table, i, m.x.data() + m.rows * m.cols);
        m.y.push_back(schema.scale_target(*table.targets[i]));
        ++m.rows;
    }
    return m;
}

std::vector<double> encode_features(const FeatureSchema& schema, const FeatureTable& table) {
    const Encoder enc(schema, table);
    std::vector<double> x(table.size() * enc.cols);
    for (std::size_t i = 0; i < table.size(); ++i) enc.encode(table, i, x.data() + i * enc.cols);
    return x;
}

PreparedMatrix PreparedMatrix::select(std::span<const std::size_t> idx) const {
    PreparedMatrix m;
    m.cols = cols;
    m.columns = columns;
    m.target_min = target_min;
    m.target_max = target_max;
    m.rows = idx.size();
    m.x.reserve(idx.size() * cols);
    for (auto i : idx) {
        auto r = row(i);
        m.x.insert(m.x.end(), r.begin(), r.end());
        if (!y.empty()) m.y.push_back(y[i]);
    }
    return m;
}

}  // namespace siot::learner
