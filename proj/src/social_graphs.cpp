#include "siot/social_graphs.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include <fmt/format.h>

#include "csv.hpp"
#include "siot/error.hpp"

namespace siot {

std::string_view to_string(RelationKind k) {
    switch (k) {
        case RelationKind::Clor: return "clor";
        case RelationKind::Sfor: return "sfor";
        case RelationKind::Sor: return "sor";
    }
    return "?";
}

std::optional<RelationKind> parse_relation_kind(std::string_view s) {
    if (s == "clor" || s == "CLOR") return RelationKind::Clor;
    if (s == "sfor" || s == "SFOR") return RelationKind::Sfor;
    if (s == "sor" || s == "SOR") return RelationKind::Sor;
    return std::nullopt;
}

void SocialGraph::add_node(DeviceId id) {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
    if (it == nodes_.end() || *it != id) nodes_.insert(it, id);
}

void SocialGraph::set_edge(DeviceId a, DeviceId b, double weight) {
    if (a == b) throw Error(ErrorCode::InvalidParams, fmt::format("self-loop on device {}", a));
    if (!(weight > 0.0 && weight <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, fmt::format("edge {}-{} weight {} outside (0,1]", a, b, weight));
    }
    add_node(a);
    add_node(b);
    edges_[key(a, b)] = weight;
}

std::optional<double> SocialGraph::weight(DeviceId a, DeviceId b) const {
    auto it = edges_.find(key(a, b));
    if (it == edges_.end()) return std::nullopt;
    return it->second;
}

bool SocialGraph::has_node(DeviceId id) const { return std::binary_search(nodes_.begin(), nodes_.end(), id); }

double SocialGraph::total_weight() const {
    double w = 0.0;
    for (const auto& [k, v] : edges_) w += v;
    return w;
}

void SocialGraph::save_edge_list(const std::filesystem::path& path) const {
    auto out = csv::open_for_write(path);
    out << "device_a,device_b,weight\n";
    for (const auto& [k, w] : edges_) out << fmt::format("{},{},{}\n", k.first, k.second, w);
}

SocialGraph SocialGraph::load_edge_list(const std::filesystem::path& path, RelationKind kind,
                                        const std::vector<DeviceId>& nodes) {
    SocialGraph g(kind);
    std::vector<DeviceId> sorted = nodes;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    g.nodes_ = std::move(sorted);
    csv::read(path, "device_a,device_b,weight", [&](const std::vector<std::string_view>& f, std::size_t line) {
        if (f.size() != 3) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 3 fields", line));
        g.set_edge(csv::parse_int(f[0], line, "device_a"), csv::parse_int(f[1], line, "device_b"),
                   csv::parse_double(f[2], line, "weight"));
    });
    return g;
}

// ---------------------------------------------------------------------------

std::vector<int> owner_hop_distances(const std::vector<std::vector<OwnerId>>& adjacency, OwnerId source,
                                     int max_hops) {
    std::vector<int> dist(adjacency.size(), kUnreachable);
    dist[static_cast<std::size_t>(source)] = 0;
    std::deque<OwnerId> queue{source};
    while (!queue.empty()) {
        auto u = queue.front();
        queue.pop_front();
        const int du = dist[static_cast<std::size_t>(u)];
        if (du >= max_hops) continue;
        for (auto v : adjacency[static_cast<std::size_t>(u)]) {
            auto& dv = dist[static_cast<std::size_t>(v)];
            if (dv == kUnreachable) {
                dv = du + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

int owner_hop_distance(const OwnerNetwork& owners, OwnerId a, OwnerId b) {
    for (auto o : {a, b}) {
        if (o < 0 || o >= owners.n_owners) throw Error(ErrorCode::UnknownOwner, fmt::format("owner {}", o));
    }
    return owner_hop_distances(owners.adjacency(), a, kUnreachable)[static_cast<std::size_t>(b)];
}

SocialGraph build_clor(const std::vector<Device>& devices, double threshold_m) {
    if (!(threshold_m > 0.0)) throw Error(ErrorCode::InvalidParams, "CLOR threshold must be positive");
    SocialGraph g(RelationKind::Clor);
    for (const auto& d : devices) g.add_node(d.id);
    // sort by latitude so the inner loop can stop once the latitude gap alone exceeds the threshold
    std::vector<const Device*> by_lat;
    for (const auto& d : devices) by_lat.push_back(&d);
    std::sort(by_lat.begin(), by_lat.end(), [](auto* x, auto* y) {
        return std::tie(x->latitude, x->id) < std::tie(y->latitude, y->id);
    });
    const double lat_window_deg = threshold_m / (kEarthRadiusM * 3.14159265358979323846 / 180.0);
    for (std::size_t i = 0; i < by_lat.size(); ++i) {
        for (std::size_t j = i + 1; j < by_lat.size(); ++j) {
            if (by_lat[j]->latitude - by_lat[i]->latitude > lat_window_deg) break;
            const double d = geo_distance(by_lat[i]->location(), by_lat[j]->location());
            if (d >= threshold_m) continue;
            g.set_edge(by_lat[i]->id, by_lat[j]->id, std::clamp(1.0 - d / threshold_m, 1e-12, 1.0));
        }
    }
    return g;
}

SocialGraph build_sfor(const std::vector<Device>& devices, const OwnerNetwork& owners, int max_hops) {
    if (max_hops < 1) throw Error(ErrorCode::InvalidParams, "max_hops must be >= 1");
    for (const auto& d : devices) {
        if (d.owner_id < 0 || d.owner_id >= owners.n_owners) {
            throw Error(ErrorCode::UnknownOwner, fmt::format("device {} references owner {}", d.id, d.owner_id));
        }
    }
    SocialGraph g(RelationKind::Sfor);
    std::unordered_map<OwnerId, std::vector<DeviceId>> by_owner;
    for (const auto& d : devices) {
        g.add_node(d.id);
        by_owner[d.owner_id].push_back(d.id);
    }
    const auto adj = owners.adjacency();
    for (const auto& [owner, owned] : by_owner) {
        const auto dist = owner_hop_distances(adj, owner, max_hops);
        for (const auto& [other, other_owned] : by_owner) {
            if (other < owner) continue;
            const int h = dist[static_cast<std::size_t>(other)];
            if (h > max_hops) continue;
            const double w = h == 0 ? 1.0 : 0.5 / h;
            for (auto a : owned) {
                for (auto b : other_owned) {
                    if (a != b) g.set_edge(a, b, w);
                }
            }
        }
    }
    return g;
}

SocialGraph build_sor(const std::vector<Device>& devices, const std::vector<MeetingEvent>& meetings,
                      int min_meetings, double min_duration_min) {
    if (min_meetings < 1 || !(min_duration_min > 0.0)) {
        throw Error(ErrorCode::InvalidParams, "SOR needs min_meetings >= 1 and min_duration_min > 0");
    }
    SocialGraph g(RelationKind::Sor);
    for (const auto& d : devices) g.add_node(d.id);
    std::map<SocialGraph::Key, int> counts;
    for (const auto& m : meetings) {
        for (auto id : {m.device_a, m.device_b}) {
            if (!g.has_node(id)) throw Error(ErrorCode::UnknownDevice, fmt::format("meeting participant {}", id));
        }
        if (m.device_a == m.device_b || m.duration_min < min_duration_min) continue;
        ++counts[{std::min(m.device_a, m.device_b), std::max(m.device_a, m.device_b)}];
    }
    for (const auto& [k, c] : counts) {
        if (c < min_meetings) continue;
        g.set_edge(k.first, k.second, std::min(1.0, c / (2.0 * min_meetings)));
    }
    return g;
}

}  // namespace siot
