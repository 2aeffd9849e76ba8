#include "siot/community.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "csv.hpp"
#include "siot/error.hpp"
#include "siot/rng.hpp"

namespace siot {

std::string_view to_string(CandidateMode m) { return m == CandidateMode::Intersection ? "intersection" : "union"; }

std::optional<CandidateMode> parse_candidate_mode(std::string_view s) {
    if (s == "intersection") return CandidateMode::Intersection;
    if (s == "union") return CandidateMode::Union;
    return std::nullopt;
}

std::optional<CommunityLabel> CommunityAssignment::label_of(DeviceId id) const {
    auto it = labels.find(id);
    if (it == labels.end()) return std::nullopt;
    return it->second;
}

std::map<CommunityLabel, std::vector<DeviceId>> CommunityAssignment::communities() const {
    std::map<CommunityLabel, std::vector<DeviceId>> out;
    for (const auto& [id, c] : labels) out[c].push_back(id);
    return out;
}

void CommunityAssignment::save_csv(const std::filesystem::path& path) const {
    auto out = csv::open_for_write(path);
    out << "device_id,community_label\n";
    for (const auto& [id, c] : labels) out << id << ',' << c << '\n';
}

CommunityAssignment CommunityAssignment::load_csv(const std::filesystem::path& path, RelationKind kind) {
    CommunityAssignment a;
    a.kind = kind;
    csv::read(path, "device_id,community_label", [&](const std::vector<std::string_view>& f, std::size_t line) {
        if (f.size() != 2) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 2 fields", line));
        a.labels[csv::parse_int(f[0], line, "device_id")] = csv::parse_int(f[1], line, "community_label");
    });
    return a;
}

double modularity(const SocialGraph& graph, const std::map<DeviceId, CommunityLabel>& labels) {
    const double m2 = 2.0 * graph.total_weight();
    if (!(m2 > 0.0)) throw Error(ErrorCode::EmptyGraph, "modularity of a graph without edge weight");
    std::map<CommunityLabel, double> internal, total;
    auto label = [&](DeviceId id) {
        auto it = labels.find(id);
        if (it == labels.end()) throw Error(ErrorCode::InvalidParams, fmt::format("node {} has no label", id));
        return it->second;
    };
    for (auto id : graph.nodes()) total[label(id)] += 0.0;
    for (const auto& [k, w] : graph.edges()) {
        const auto ca = label(k.first), cb = label(k.second);
        total[ca] += w;
        total[cb] += w;
        if (ca == cb) internal[ca] += 2.0 * w;
    }
    double q = 0.0;
    for (const auto& [c, tot] : total) {
        const double in = internal.count(c) ? internal[c] : 0.0;
        q += in / m2 - (tot / m2) * (tot / m2);
    }
    return q;
}

namespace {

/// Symmetric weighted graph on 0..n-1 with explicit self weights (each internal edge counted twice).
struct LevelGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;
    std::vector<double> self;
    std::vector<double> degree;
    double m2 = 0.0;

    std::size_t size() const { return adj.size(); }

    void finalize() {
        degree.assign(size(), 0.0);
        m2 = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            double k = self[i];
            for (auto [j, w] : adj[i]) k += w;
            degree[i] = k;
            m2 += k;
        }
    }

    double modularity(const std::vector<std::size_t>& comm) const {
        std::vector<double> in(size(), 0.0), tot(size(), 0.0);
        for (std::size_t i = 0; i < size(); ++i) {
            tot[comm[i]] += degree[i];
            in[comm[i]] += self[i];
            for (auto [j, w] : adj[i]) {
                if (comm[j] == comm[i]) in[comm[i]] += w;
            }
        }
        double q = 0.0;
        for (std::size_t c = 0; c < size(); ++c) {
            if (tot[c] == 0.0 && in[c] == 0.0) continue;
            q += in[c] / m2 - (tot[c] / m2) * (tot[c] / m2);
        }
        return q;
    }
};

constexpr double kMinGain = 1e-7;

/// Local-move phase. Returns the community of each node (labels are node indices).
std::vector<std::size_t> local_moves(const LevelGraph& g, const std::vector<std::size_t>& order) {
    const std::size_t n = g.size();
    std::vector<std::size_t> comm(n);
    std::iota(comm.begin(), comm.end(), std::size_t{0});
    std::vector<double> tot = g.degree;
    std::vector<double> link(n, 0.0);
    std::vector<std::size_t> touched;

    double q = g.modularity(comm);
    while (true) {
        bool moved = false;
        for (auto i : order) {
            const std::size_t old = comm[i];
            const double ki = g.degree[i];
            touched.clear();
            for (auto [j, w] : g.adj[i]) {
                if (link[comm[j]] == 0.0) touched.push_back(comm[j]);
                link[comm[j]] += w;
            }
            tot[old] -= ki;
            std::size_t best = old;
            double best_gain = link[old] - tot[old] * ki / g.m2;
            for (auto c : touched) {
                const double gain = link[c] - tot[c] * ki / g.m2;
                if (gain > best_gain || (gain == best_gain && c < best)) {
                    best = c;
                    best_gain = gain;
                }
            }
            tot[best] += ki;
            comm[i] = best;
            if (best != old) moved = true;
            for (auto c : touched) link[c] = 0.0;
        }
        if (!moved) break;
        const double next = g.modularity(comm);
        const double gain = next - q;
        q = next;
        if (gain < kMinGain) break;
    }
    return comm;
}

}  // namespace

CommunityAssignment louvain(const SocialGraph& graph, std::uint64_t seed) {
    if (!(graph.total_weight() > 0.0)) throw Error(ErrorCode::EmptyGraph, "louvain on a graph without edge weight");

    const auto& ids = graph.nodes();
    std::map<DeviceId, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;

    LevelGraph g;
    g.adj.resize(ids.size());
    g.self.assign(ids.size(), 0.0);
    for (const auto& [k, w] : graph.edges()) {
        auto a = index.at(k.first), b = index.at(k.second);
        g.adj[a].emplace_back(b, w);
        g.adj[b].emplace_back(a, w);
    }
    for (auto& row : g.adj) std::sort(row.begin(), row.end());
    g.finalize();

    Rng rng(seed);
    std::vector<std::size_t> node_comm(ids.size());
    std::iota(node_comm.begin(), node_comm.end(), std::size_t{0});

    CommunityAssignment out;
    out.kind = graph.kind();
    std::vector<std::size_t> identity(g.size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    double q = g.modularity(identity);

    while (true) {
        std::vector<std::size_t> order(g.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (seed != 0) std::shuffle(order.begin(), order.end(), rng);
        const auto comm = local_moves(g, order);

        // renumber by first appearance
        std::vector<std::size_t> remap(g.size(), SIZE_MAX);
        std::size_t next = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (remap[comm[i]] == SIZE_MAX) remap[comm[i]] = next++;
        }
        std::vector<std::size_t> level_comm(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) level_comm[i] = remap[comm[i]];
        const double level_q = g.modularity(level_comm);

        if (next == g.size() || level_q - q < kMinGain) {
            if (level_q > q && next < g.size()) {
                for (auto& c : node_comm) c = level_comm[c];
                q = level_q;
            }
            out.level_modularity.push_back(q);
            break;
        }
        for (auto& c : node_comm) c = level_comm[c];
        q = level_q;
        out.level_modularity.push_back(q);

        LevelGraph agg;
        agg.adj.resize(next);
        agg.self.assign(next, 0.0);
        std::vector<std::map<std::size_t, double>> acc(next);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto ci = level_comm[i];
            agg.self[ci] += g.self[i];
            for (auto [j, w] : g.adj[i]) {
                const auto cj = level_comm[j];
                if (ci == cj) {
                    agg.self[ci] += w;
                } else {
                    acc[ci][cj] += w;
                }
            }
        }
        for (std::size_t c = 0; c < next; ++c) agg.adj[c].assign(acc[c].begin(), acc[c].end());
        agg.finalize();
        g = std::move(agg);
    }

    // labels by first appearance over ascending device ids
    std::vector<CommunityLabel> final_label(ids.size(), -1);
    CommunityLabel next_label = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& l = final_label[node_comm[i]];
        if (l < 0) l = next_label++;
        out.labels[ids[i]] = l;
    }
    out.modularity = modularity(graph, out.labels);
    return out;
}

CandidateSet candidate_set(DeviceId requester, std::span<const CommunityAssignment> assignments,
                           CandidateMode mode) {
    if (assignments.empty()) throw Error(ErrorCode::InvalidParams, "candidate_set needs at least one assignment");
    CandidateSet out;
    out.requester_id = requester;
    out.mode = mode;
    bool first = true;
    for (const auto& a : assignments) {
        std::set<DeviceId> peers;
        if (auto label = a.label_of(requester)) {
            for (const auto& [id, c] : a.labels) {
                if (c == *label && id != requester) peers.insert(id);
            }
        }
        if (mode == CandidateMode::Union) {
            out.members.insert(peers.begin(), peers.end());
        } else if (first) {
            out.members = std::move(peers);
        } else {
            std::set<DeviceId> both;
            std::set_intersection(out.members.begin(), out.members.end(), peers.begin(), peers.end(),
                                  std::inserter(both, both.end()));
            out.members = std::move(both);
        }
        first = false;
    }
    if (out.members.empty()) {
        throw Error(ErrorCode::NoCandidates,
                    fmt::format("requester {} has no trusted peers ({})", requester, to_string(mode)));
    }
    return out;
}

CommunitySizeSummary summarize_sizes(const CommunityAssignment& a, std::size_t min_size) {
    CommunitySizeSummary s;
    for (const auto& [label, members] : a.communities()) {
        if (members.size() < min_size) {
            s.others_devices += members.size();
            ++s.others_communities;
        } else {
            s.communities.push_back({label, members.size()});
        }
    }
    return s;
}

}  // namespace siot
