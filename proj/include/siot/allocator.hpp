#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "siot/community.hpp"
#include "siot/dataset.hpp"
#include "siot/learner/model.hpp"
#include "siot/oracle.hpp"

namespace siot {

/// Estimates the total response time (seconds) of running `task` on each edge.
class RtPredictor {
public:
    virtual ~RtPredictor() = default;
    virtual std::vector<double> predict(const Device& requester, const TaskRequest& task,
                                        std::span<const Device* const> edges) const = 0;
};

/// The ground-truth response-time model used as a predictor.
class OraclePredictor final : public RtPredictor {
public:
    explicit OraclePredictor(OracleParams params = {}) : params_(params) {}
    std::vector<double> predict(const Device& requester, const TaskRequest& task,
                                std::span<const Device* const> edges) const override;

private:
    OracleParams params_;
};

/// A trained regression model; predictions are converted back to seconds and floored at 1 microsecond.
class ModelPredictor final : public RtPredictor {
public:
    ModelPredictor(const learner::RegressionModel& model, OracleParams params = {})
        : model_(model), params_(params) {}
    std::vector<double> predict(const Device& requester, const TaskRequest& task,
                                std::span<const Device* const> edges) const override;

private:
    const learner::RegressionModel& model_;
    OracleParams params_;
};

struct AllocationPolicy {
    CandidateMode mode = CandidateMode::Intersection;
    bool fallback_to_union = true;
};

struct AllocationResult {
    DeviceId requester_id = 0;
    DeviceId edge_id = 0;
    double predicted_rt_s = 0.0;
    std::optional<double> oracle_rt_s;
    std::size_t candidate_count = 0;
    std::size_t filtered_count = 0;
    std::map<RelationKind, std::optional<double>> relation_weights;
    CandidateMode mode_used = CandidateMode::Intersection;
    TaskRequest task;
};

struct RankedCandidate {
    DeviceId id = 0;
    double predicted_rt_s = 0.0;
};

/// Available candidates in ascending predicted RT, ties by id.
/// Throws NoCandidates for an empty set and NoAvailableCandidates when none can compute.
std::vector<RankedCandidate> rank_candidates(const TaskRequest& request, const DatasetBundle& bundle,
                                             const std::set<DeviceId>& candidates, const RtPredictor& predictor);

/// Trusted candidate set -> availability filter -> predicted-RT argmin.
/// `graphs` supply the relation weights reported for the chosen pair.
AllocationResult allocate(const TaskRequest& request, const DatasetBundle& bundle,
                          std::span<const CommunityAssignment> assignments, std::span<const SocialGraph> graphs,
                          const RtPredictor& predictor, const AllocationPolicy& policy = {},
                          const std::optional<OracleParams>& oracle = std::nullopt);

nlohmann::json to_json(const AllocationResult& r);
std::string table_header();
std::string table_row(const AllocationResult& r, const DatasetBundle& bundle);

}  // namespace siot
