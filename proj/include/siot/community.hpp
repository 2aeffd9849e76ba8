#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "siot/social_graphs.hpp"

namespace siot {

using CommunityLabel = std::int64_t;

struct CommunityAssignment {
    RelationKind kind = RelationKind::Sfor;
    std::map<DeviceId, CommunityLabel> labels;
    double modularity = 0.0;
    /// Modularity after each aggregation level, non-decreasing.
    std::vector<double> level_modularity;

    std::optional<CommunityLabel> label_of(DeviceId id) const;
    std::map<CommunityLabel, std::vector<DeviceId>> communities() const;

    void save_csv(const std::filesystem::path& path) const;
    static CommunityAssignment load_csv(const std::filesystem::path& path, RelationKind kind);
};

enum class CandidateMode { Intersection, Union };
std::string_view to_string(CandidateMode m);
std::optional<CandidateMode> parse_candidate_mode(std::string_view s);

struct CandidateSet {
    DeviceId requester_id = 0;
    std::set<DeviceId> members;
    CandidateMode mode = CandidateMode::Intersection;
};

/// Weighted Newman modularity of `labels` on `graph`. Throws EmptyGraph when the total weight is 0.
double modularity(const SocialGraph& graph, const std::map<DeviceId, CommunityLabel>& labels);

/// Louvain local-move + aggregation. seed 0 visits nodes in ascending id order; other seeds shuffle it.
CommunityAssignment louvain(const SocialGraph& graph, std::uint64_t seed = 0);

/// Trusted peers of `requester`: members sharing its community, combined across relations.
/// Throws NoCandidates when empty.
CandidateSet candidate_set(DeviceId requester, std::span<const CommunityAssignment> assignments,
                           CandidateMode mode);

struct CommunitySizeSummary {
    struct Entry {
        CommunityLabel label;
        std::size_t size;
    };
    std::vector<Entry> communities;  // size >= min_size, by label
    std::size_t others_devices = 0;
    std::size_t others_communities = 0;
};

/// Groups communities smaller than `min_size` into an "others" bucket.
CommunitySizeSummary summarize_sizes(const CommunityAssignment& a, std::size_t min_size = 4);

}  // namespace siot
