#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "siot/allocator.hpp"
#include "siot/community.hpp"
#include "siot/dataset.hpp"
#include "siot/learner/grid_search.hpp"
#include "siot/learner/metrics.hpp"
#include "siot/oracle.hpp"
#include "siot/social_graphs.hpp"

namespace siot {

/// Thrown for invalid configuration; the CLI maps it to exit status 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stage failure wrapper; the CLI maps it to exit status 2.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunConfig {
    std::uint64_t master_seed = 1;
    /// Explicit named seeds; missing names derive from master_seed.
    std::map<std::string, std::uint64_t> seed_overrides;

    std::optional<std::filesystem::path> devices_path;
    std::optional<std::filesystem::path> meetings_path;
    std::optional<std::filesystem::path> owners_path;
    std::optional<std::int64_t> n_owners_override;  // with owners_path
    std::filesystem::path out_dir = "out";

    std::int64_t n_devices = 2568;
    std::int64_t n_owners = 1200;
    int ws_k = 4;
    double ws_beta = 0.1;
    int days = 10;
    GeoBox geo_box;

    double clor_threshold_m = 100.0;
    int sfor_max_hops = 2;
    int sor_min_meetings = 3;
    double sor_min_duration_min = 30.0;
    /// Relations whose communities form the candidate set.
    std::vector<RelationKind> relations = {RelationKind::Sfor, RelationKind::Sor};
    AllocationPolicy policy;
    std::size_t others_min_size = 4;

    OracleParams oracle;
    TaskDistribution tasks;
    std::int64_t experience_count = 10000;
    ExperienceMode experience_mode = ExperienceMode::Dynamic;

    std::vector<learner::ModelVariant> models = {learner::ModelVariant::DecisionTree,
                                                 learner::ModelVariant::RandomForest,
                                                 learner::ModelVariant::GradientBoosting};
    double train_fraction = 0.75;
    int k_folds = 3;
    std::map<learner::ModelVariant, learner::HyperGrid> grids;
    std::size_t allocation_requests = 3;

    std::uint64_t seed(const std::string& name) const;
    /// Throws ConfigError naming the first invalid field.
    void validate() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    /// FNV-1a of the canonical JSON form, as 16 hex digits.
    std::string hash() const;
    /// {config_hash, seeds} block embedded in every JSON artifact.
    nlohmann::json stamp() const;
};

inline const std::vector<std::string> kSeedNames = {"owners",      "devices", "meetings", "louvain",
                                                    "experiences", "split",   "training", "allocation"};

// Stage functions. Each writes its artifacts under config.out_dir and returns its in-memory result.

DatasetBundle stage_generate(const RunConfig& cfg);
DatasetBundle load_bundle(const RunConfig& cfg);

struct RelationGraphs {
    std::vector<SocialGraph> graphs;  // CLOR, SFOR, SOR
    const SocialGraph& get(RelationKind k) const;
};
RelationGraphs stage_build_graphs(const RunConfig& cfg, const DatasetBundle& bundle);
RelationGraphs load_graphs(const RunConfig& cfg, const DatasetBundle& bundle);

std::vector<CommunityAssignment> stage_communities(const RunConfig& cfg, const RelationGraphs& graphs);
std::vector<CommunityAssignment> load_communities(const RunConfig& cfg);

std::vector<SharingExperience> stage_simulate(const RunConfig& cfg, const DatasetBundle& bundle);
std::vector<SharingExperience> load_experiences(const RunConfig& cfg);

/// Filters unavailable rows, splits, fits the preprocessor on the training part and encodes both.
struct PreparedData {
    learner::FeatureSchema schema;
    learner::PreparedMatrix train;
    learner::PreparedMatrix test;
    std::size_t unavailable = 0;
};
PreparedData prepare_data(const RunConfig& cfg, const std::vector<SharingExperience>& experiences);

struct TrainedModels {
    std::map<learner::ModelVariant, learner::RegressionModel> models;
    std::map<learner::ModelVariant, learner::GridSearchResult> searches;
};
TrainedModels stage_train(const RunConfig& cfg, const PreparedData& data);
std::map<learner::ModelVariant, learner::RegressionModel> load_models(const RunConfig& cfg);

nlohmann::json stage_evaluate(const RunConfig& cfg, const PreparedData& data,
                              const std::map<learner::ModelVariant, learner::RegressionModel>& models);

/// Allocates `requests` random tasks from requesters that have at least one trusted computing peer.
std::vector<AllocationResult> stage_allocate(const RunConfig& cfg, const DatasetBundle& bundle,
                                             const RelationGraphs& graphs,
                                             const std::vector<CommunityAssignment>& assignments,
                                             const learner::RegressionModel& model, std::size_t requests);

/// Figure data: per-community device-type frequencies and per-model PCD CDFs (reads per_sample_pcd.csv).
void stage_report(const RunConfig& cfg, const DatasetBundle& bundle,
                  const std::vector<CommunityAssignment>& assignments);

/// Runs every stage in order; returns the metrics report.
nlohmann::json run_pipeline(const RunConfig& cfg);

/// Candidate assignments used for trust, in the configured relation order.
std::vector<CommunityAssignment> select_relations(const RunConfig& cfg,
                                                  const std::vector<CommunityAssignment>& all);

/// Requesters whose candidate set (with fallback) holds at least one computing device.
std::vector<DeviceId> servable_requesters(const DatasetBundle& bundle,
                                          const std::vector<CommunityAssignment>& assignments,
                                          const AllocationPolicy& policy);

/// Cumulative share of samples (percent) at each sorted per-sample PCD value.
std::vector<std::pair<double, double>> pcd_cdf(std::vector<double> per_sample_pcd);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace siot
