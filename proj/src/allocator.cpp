#include "siot/allocator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "siot/error.hpp"
#include "siot/learner/preprocess.hpp"

namespace siot {

std::vector<double> OraclePredictor::predict(const Device& requester, const TaskRequest& task,
                                             std::span<const Device* const> edges) const {
    std::vector<double> out;
    out.reserve(edges.size());
    for (const auto* e : edges) {
        auto rt = response_time(requester, task, *e, params_);
        out.push_back(rt.value_or(std::numeric_limits<double>::infinity()));
    }
    return out;
}

std::vector<double> ModelPredictor::predict(const Device& requester, const TaskRequest& task,
                                            std::span<const Device* const> edges) const {
    if (task.requester_id != requester.id) {
        throw Error(ErrorCode::MismatchedRequest, fmt::format("task requester {} vs {}", task.requester_id, requester.id));
    }
    std::vector<SharingExperience> rows;
    rows.reserve(edges.size());
    for (const auto* e : edges) rows.push_back(make_experience(requester, task, *e, params_));
    const auto table = learner::experience_table(rows);
    const auto& schema = model_.schema();
    const auto x = learner::encode_features(schema, table);
    const auto cols = schema.column_count();
    std::vector<double> out(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double scaled = model_.predict(std::span<const double>(x.data() + i * cols, cols));
        out[i] = std::max(1e-6, schema.unscale_target(scaled));
    }
    return out;
}

std::vector<RankedCandidate> rank_candidates(const TaskRequest& request, const DatasetBundle& bundle,
                                             const std::set<DeviceId>& candidates, const RtPredictor& predictor) {
    if (candidates.empty()) throw Error(ErrorCode::NoCandidates, fmt::format("requester {}", request.requester_id));
    const Device* requester = bundle.find(request.requester_id);
    if (!requester) throw Error(ErrorCode::UnknownDevice, fmt::format("requester {}", request.requester_id));
    std::vector<const Device*> edges;
    for (auto id : candidates) {
        const Device* d = bundle.find(id);
        if (!d) throw Error(ErrorCode::UnknownDevice, fmt::format("candidate {}", id));
        if (d->can_compute()) edges.push_back(d);
    }
    if (edges.empty()) {
        throw Error(ErrorCode::NoAvailableCandidates,
                    fmt::format("requester {}: all {} candidates have availability 0", request.requester_id,
                                candidates.size()));
    }
    const auto rt = predictor.predict(*requester, request, edges);
    std::vector<RankedCandidate> out;
    for (std::size_t i = 0; i < edges.size(); ++i) out.push_back({edges[i]->id, rt[i]});
    std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        return a.predicted_rt_s < b.predicted_rt_s || (a.predicted_rt_s == b.predicted_rt_s && a.id < b.id);
    });
    return out;
}

AllocationResult allocate(const TaskRequest& request, const DatasetBundle& bundle,
                          std::span<const CommunityAssignment> assignments, std::span<const SocialGraph> graphs,
                          const RtPredictor& predictor, const AllocationPolicy& policy,
                          const std::optional<OracleParams>& oracle) {
    const Device* requester = bundle.find(request.requester_id);
    if (!requester) throw Error(ErrorCode::UnknownDevice, fmt::format("requester {}", request.requester_id));

    CandidateSet candidates;
    try {
        candidates = candidate_set(request.requester_id, assignments, policy.mode);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCandidates || policy.mode == CandidateMode::Union || !policy.fallback_to_union) {
            throw;
        }
        candidates = candidate_set(request.requester_id, assignments, CandidateMode::Union);
    }

    const auto ranked = rank_candidates(request, bundle, candidates.members, predictor);
    AllocationResult r;
    r.requester_id = request.requester_id;
    r.task = request;
    r.edge_id = ranked.front().id;
    r.predicted_rt_s = ranked.front().predicted_rt_s;
    r.candidate_count = candidates.members.size();
    r.filtered_count = ranked.size();
    r.mode_used = candidates.mode;
    for (const auto& g : graphs) r.relation_weights[g.kind()] = g.weight(request.requester_id, r.edge_id);
    if (oracle) r.oracle_rt_s = response_time(*requester, request, *bundle.find(r.edge_id), *oracle);
    return r;
}

nlohmann::json to_json(const AllocationResult& r) {
    nlohmann::json weights = nlohmann::json::object();
    for (const auto& [kind, w] : r.relation_weights) {
        weights[std::string(to_string(kind))] = w ? nlohmann::json(*w) : nlohmann::json(nullptr);
    }
    nlohmann::json j = {{"requester_id", r.requester_id},
                        {"instruction_count_mi", r.task.instruction_count_mi},
                        {"message_size_mb", r.task.message_size_mb},
                        {"edge_id", r.edge_id},
                        {"predicted_rt_s", r.predicted_rt_s},
                        {"candidate_count", r.candidate_count},
                        {"filtered_count", r.filtered_count},
                        {"relation_weights", weights},
                        {"mode_used", std::string(to_string(r.mode_used))}};
    j["oracle_rt_s"] = r.oracle_rt_s ? nlohmann::json(*r.oracle_rt_s) : nlohmann::json(nullptr);
    return j;
}

std::string table_header() {
    return fmt::format("{:>8} {:>14} {:>6} {:<32} {:>8} {:>8} {:>13}", "req", "size(Mb)/IC", "TCDP", "MDP (R, RAM)",
                       "edge", "RT (s)", "SFOR/SOR");
}

std::string table_row(const AllocationResult& r, const DatasetBundle& bundle) {
    auto weight = [&](RelationKind k) -> std::string {
        auto it = r.relation_weights.find(k);
        if (it == r.relation_weights.end() || !it->second) return "-";
        return fmt::format("{:.2g}", *it->second);
    };
    std::string mdp = "?";
    if (const Device* d = bundle.find(r.edge_id)) {
        mdp = fmt::format("{} ({:.1f} GHz, {:g} GB)", to_string(d->device_type), d->clock_rate_ghz, d->ram_gb);
    }
    return fmt::format("{:>8} {:>14} {:>6} {:<32} {:>8} {:>8.3f} {:>13}", r.requester_id,
                       fmt::format("{:.2f}/{:.0f}", r.task.message_size_mb, r.task.instruction_count_mi),
                       r.candidate_count, mdp, r.edge_id, r.predicted_rt_s,
                       weight(RelationKind::Sfor) + "/" + weight(RelationKind::Sor));
}

}  // namespace siot
