#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "siot/dataset.hpp"

namespace siot {

enum class RelationKind { Clor, Sfor, Sor };

std::string_view to_string(RelationKind k);
std::optional<RelationKind> parse_relation_kind(std::string_view s);

/// Undirected weighted graph over device ids. Each edge is stored once under (min id, max id).
class SocialGraph {
public:
    using Key = std::pair<DeviceId, DeviceId>;

    SocialGraph() = default;
    explicit SocialGraph(RelationKind kind) : kind_(kind) {}

    RelationKind kind() const { return kind_; }

    void add_node(DeviceId id);
    /// Weight must lie in (0, 1]; self-loops are rejected.
    void set_edge(DeviceId a, DeviceId b, double weight);

    std::optional<double> weight(DeviceId a, DeviceId b) const;
    bool has_node(DeviceId id) const;

    const std::vector<DeviceId>& nodes() const { return nodes_; }
    const std::map<Key, double>& edges() const { return edges_; }
    std::size_t edge_count() const { return edges_.size(); }
    double total_weight() const;

    void save_edge_list(const std::filesystem::path& path) const;
    static SocialGraph load_edge_list(const std::filesystem::path& path, RelationKind kind,
                                      const std::vector<DeviceId>& nodes);

private:
    static Key key(DeviceId a, DeviceId b) { return {std::min(a, b), std::max(a, b)}; }

    RelationKind kind_ = RelationKind::Clor;
    std::vector<DeviceId> nodes_;  // sorted
    std::map<Key, double> edges_;
};

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

/// Breadth-first hop count between owners; kUnreachable when disconnected.
int owner_hop_distance(const OwnerNetwork& owners, OwnerId a, OwnerId b);

/// Hop distances from `source` to every owner, stopping at `max_hops`; farther owners get kUnreachable.
std::vector<int> owner_hop_distances(const std::vector<std::vector<OwnerId>>& adjacency, OwnerId source,
                                     int max_hops);

SocialGraph build_clor(const std::vector<Device>& devices, double threshold_m);
SocialGraph build_sfor(const std::vector<Device>& devices, const OwnerNetwork& owners, int max_hops = 2);
SocialGraph build_sor(const std::vector<Device>& devices, const std::vector<MeetingEvent>& meetings,
                      int min_meetings = 3, double min_duration_min = 30.0);

}  // namespace siot
