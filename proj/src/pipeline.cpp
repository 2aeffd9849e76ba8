#include "siot/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "csv.hpp"
#include "siot/error.hpp"
#include "siot/learner/preprocess.hpp"
#include "siot/rng.hpp"

namespace siot {

using nlohmann::json;
using learner::ModelVariant;

// ---------------------------------------------------------------------------
// Config

std::uint64_t RunConfig::seed(const std::string& name) const {
    auto it = seed_overrides.find(name);
    if (it != seed_overrides.end()) return it->second;
    return derive_seed(master_seed, name);
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
}

json depth_list(const std::vector<int>& v) {
    json out = json::array();
    for (int d : v) out.push_back(d < 0 ? json(nullptr) : json(d));
    return out;
}

std::vector<int> parse_depths(const json& j) {
    std::vector<int> out;
    for (const auto& d : j) out.push_back(d.is_null() ? learner::kUnboundedDepth : d.get<int>());
    return out;
}

json grid_to_json(const learner::HyperGrid& g) {
    json j = json::object();
    if (!g.max_depth.empty()) j["max_depth"] = depth_list(g.max_depth);
    if (!g.min_samples_leaf.empty()) j["min_samples_leaf"] = g.min_samples_leaf;
    if (!g.n_trees.empty()) j["n_trees"] = g.n_trees;
    if (!g.feature_fraction.empty()) j["feature_fraction"] = g.feature_fraction;
    if (!g.bootstrap.empty()) j["bootstrap"] = g.bootstrap;
    if (!g.n_stages.empty()) j["n_stages"] = g.n_stages;
    if (!g.learning_rate.empty()) j["learning_rate"] = g.learning_rate;
    return j;
}

learner::HyperGrid grid_from_json(const json& j) {
    learner::HyperGrid g;
    if (j.contains("max_depth")) g.max_depth = parse_depths(j["max_depth"]);
    if (j.contains("min_samples_leaf")) g.min_samples_leaf = j["min_samples_leaf"].get<std::vector<int>>();
    if (j.contains("n_trees")) g.n_trees = j["n_trees"].get<std::vector<int>>();
    if (j.contains("feature_fraction")) g.feature_fraction = j["feature_fraction"].get<std::vector<double>>();
    if (j.contains("bootstrap")) g.bootstrap = j["bootstrap"].get<std::vector<bool>>();
    if (j.contains("n_stages")) g.n_stages = j["n_stages"].get<std::vector<int>>();
    if (j.contains("learning_rate")) g.learning_rate = j["learning_rate"].get<std::vector<double>>();
    return g;
}

json opt_path(const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); }

std::optional<std::filesystem::path> read_path(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return std::filesystem::path(j[key].get<std::string>());
}

}  // namespace

json RunConfig::to_json() const {
    json seeds = json::object();
    for (const auto& [k, v] : seed_overrides) seeds[k] = v;
    json relations_j = json::array();
    for (auto r : relations) relations_j.push_back(std::string(to_string(r)));
    json models_j = json::array();
    for (auto m : models) models_j.push_back(std::string(learner::short_name(m)));
    json grids_j = json::object();
    for (auto v : models) {
        auto it = grids.find(v);
        grids_j[std::string(learner::short_name(v))] =
            grid_to_json(it != grids.end() ? it->second : learner::HyperGrid::defaults(v));
    }
    return {
        {"seed", master_seed},
        {"seeds", seeds},
        {"paths",
         {{"devices", opt_path(devices_path)},
          {"meetings", opt_path(meetings_path)},
          {"owners", opt_path(owners_path)},
          {"n_owners", n_owners_override ? json(*n_owners_override) : json(nullptr)},
          {"out", out_dir.string()}}},
        {"dataset",
         {{"n_devices", n_devices},
          {"n_owners", n_owners},
          {"ws_k", ws_k},
          {"ws_beta", ws_beta},
          {"days", days},
          {"geo_box",
           {{"lat_min", geo_box.lat_min},
            {"lat_max", geo_box.lat_max},
            {"lon_min", geo_box.lon_min},
            {"lon_max", geo_box.lon_max}}}}},
        {"graphs",
         {{"clor_threshold_m", clor_threshold_m},
          {"sfor_max_hops", sfor_max_hops},
          {"sor_min_meetings", sor_min_meetings},
          {"sor_min_duration_min", sor_min_duration_min}}},
        {"communities",
         {{"relations", relations_j},
          {"mode", std::string(to_string(policy.mode))},
          {"fallback_to_union", policy.fallback_to_union},
          {"others_min_size", others_min_size}}},
        {"oracle",
         {{"d2d_latency_s", oracle.d2d_latency_s},
          {"cellular_latency_s", oracle.cellular_latency_s},
          {"d2d_bandwidth_mbps", oracle.d2d_bandwidth_mbps},
          {"cellular_bandwidth_mbps", oracle.cellular_bandwidth_mbps},
          {"d2d_radius_m", oracle.d2d_radius_m},
          {"instruction_scale", oracle.instruction_scale}}},
        {"tasks",
         {{"ic_min_mi", tasks.ic_min_mi},
          {"ic_max_mi", tasks.ic_max_mi},
          {"msg_min_mb", tasks.msg_min_mb},
          {"msg_max_mb", tasks.msg_max_mb}}},
        {"experiences", {{"count", experience_count}, {"mode", std::string(to_string(experience_mode))}}},
        {"learner",
         {{"models", models_j},
          {"train_fraction", train_fraction},
          {"k_folds", k_folds},
          {"grids", grids_j}}},
        {"allocation", {{"requests", allocation_requests}}},
    };
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    try {
        c.master_seed = j.value("seed", c.master_seed);
        if (j.contains("seeds")) {
            for (const auto& [k, v] : j["seeds"].items()) {
                require(std::find(kSeedNames.begin(), kSeedNames.end(), k) != kSeedNames.end(), "unknown seed " + k);
                c.seed_overrides[k] = v.get<std::uint64_t>();
            }
        }
        if (j.contains("paths")) {
            const auto& p = j["paths"];
            c.devices_path = read_path(p, "devices");
            c.meetings_path = read_path(p, "meetings");
            c.owners_path = read_path(p, "owners");
            if (p.contains("n_owners") && !p["n_owners"].is_null()) c.n_owners_override = p["n_owners"].get<std::int64_t>();
            if (p.contains("out") && !p["out"].is_null()) c.out_dir = p["out"].get<std::string>();
        }
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            c.n_devices = d.value("n_devices", c.n_devices);
            c.n_owners = d.value("n_owners", c.n_owners);
            c.ws_k = d.value("ws_k", c.ws_k);
            c.ws_beta = d.value("ws_beta", c.ws_beta);
            c.days = d.value("days", c.days);
            if (d.contains("geo_box")) {
                const auto& b = d["geo_box"];
                c.geo_box.lat_min = b.value("lat_min", c.geo_box.lat_min);
                c.geo_box.lat_max = b.value("lat_max", c.geo_box.lat_max);
                c.geo_box.lon_min = b.value("lon_min", c.geo_box.lon_min);
                c.geo_box.lon_max = b.value("lon_max", c.geo_box.lon_max);
            }
        }
        if (j.contains("graphs")) {
            const auto& g = j["graphs"];
            c.clor_threshold_m = g.value("clor_threshold_m", c.clor_threshold_m);
            c.sfor_max_hops = g.value("sfor_max_hops", c.sfor_max_hops);
            c.sor_min_meetings = g.value("sor_min_meetings", c.sor_min_meetings);
            c.sor_min_duration_min = g.value("sor_min_duration_min", c.sor_min_duration_min);
        }
        if (j.contains("communities")) {
            const auto& g = j["communities"];
            if (g.contains("relations")) {
                c.relations.clear();
                for (const auto& r : g["relations"]) {
                    auto kind = parse_relation_kind(r.get<std::string>());
                    require(kind.has_value(), "unknown relation " + r.get<std::string>());
                    c.relations.push_back(*kind);
                }
            }
            if (g.contains("mode")) {
                auto mode = parse_candidate_mode(g["mode"].get<std::string>());
                require(mode.has_value(), "communities.mode must be intersection or union");
                c.policy.mode = *mode;
            }
            c.policy.fallback_to_union = g.value("fallback_to_union", c.policy.fallback_to_union);
            c.others_min_size = g.value("others_min_size", c.others_min_size);
        }
        if (j.contains("oracle")) {
            const auto& o = j["oracle"];
            c.oracle.d2d_latency_s = o.value("d2d_latency_s", c.oracle.d2d_latency_s);
            c.oracle.cellular_latency_s = o.value("cellular_latency_s", c.oracle.cellular_latency_s);
            c.oracle.d2d_bandwidth_mbps = o.value("d2d_bandwidth_mbps", c.oracle.d2d_bandwidth_mbps);
            c.oracle.cellular_bandwidth_mbps = o.value("cellular_bandwidth_mbps", c.oracle.cellular_bandwidth_mbps);
            c.oracle.d2d_radius_m = o.value("d2d_radius_m", c.oracle.d2d_radius_m);
            c.oracle.instruction_scale = o.value("instruction_scale", c.oracle.instruction_scale);
        }
        if (j.contains("tasks")) {
            const auto& t = j["tasks"];
            c.tasks.ic_min_mi = t.value("ic_min_mi", c.tasks.ic_min_mi);
            c.tasks.ic_max_mi = t.value("ic_max_mi", c.tasks.ic_max_mi);
            c.tasks.msg_min_mb = t.value("msg_min_mb", c.tasks.msg_min_mb);
            c.tasks.msg_max_mb = t.value("msg_max_mb", c.tasks.msg_max_mb);
        }
        if (j.contains("experiences")) {
            const auto& e = j["experiences"];
            c.experience_count = e.value("count", c.experience_count);
            if (e.contains("mode")) {
                auto mode = parse_experience_mode(e["mode"].get<std::string>());
                require(mode.has_value(), "experiences.mode must be static or dynamic");
                c.experience_mode = *mode;
            }
        }
        if (j.contains("learner")) {
            const auto& l = j["learner"];
            if (l.contains("models")) {
                c.models.clear();
                for (const auto& m : l["models"]) {
                    auto v = learner::parse_model_variant(m.get<std::string>());
                    require(v.has_value(), "unknown model " + m.get<std::string>());
                    c.models.push_back(*v);
                }
            }
            c.train_fraction = l.value("train_fraction", c.train_fraction);
            c.k_folds = l.value("k_folds", c.k_folds);
            if (l.contains("grids")) {
                for (const auto& [k, g] : l["grids"].items()) {
                    auto v = learner::parse_model_variant(k);
                    require(v.has_value(), "unknown grid " + k);
                    c.grids[*v] = grid_from_json(g);
                }
            }
        }
        if (j.contains("allocation")) c.allocation_requests = j["allocation"].value("requests", c.allocation_requests);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

void RunConfig::validate() const {
    for (const auto& p : {devices_path, meetings_path, owners_path}) {
        if (p) require(std::filesystem::exists(*p), "generate: input file " + p->string() + " does not exist");
    }
    require(n_devices > 0, "dataset.n_devices must be > 0");
    require(n_owners > ws_k && ws_k >= 2 && ws_k % 2 == 0, "dataset needs n_owners > ws_k >= 2 with ws_k even");
    require(ws_beta >= 0.0 && ws_beta <= 1.0, "dataset.ws_beta must lie in [0,1]");
    require(days >= 1, "dataset.days must be >= 1");
    require(geo_box.lat_min < geo_box.lat_max && geo_box.lon_min < geo_box.lon_max, "dataset.geo_box is empty");
    require(clor_threshold_m > 0.0, "graphs.clor_threshold_m must be > 0");
    require(sfor_max_hops >= 1, "graphs.sfor_max_hops must be >= 1");
    require(sor_min_meetings >= 1, "graphs.sor_min_meetings must be >= 1");
    require(sor_min_duration_min > 0.0, "graphs.sor_min_duration_min must be > 0");
    require(!relations.empty(), "communities.relations must not be empty");
    require(oracle.d2d_latency_s >= 0.0 && oracle.cellular_latency_s >= 0.0, "oracle latencies must be >= 0");
    require(oracle.d2d_bandwidth_mbps > 0.0 && oracle.cellular_bandwidth_mbps > 0.0, "oracle bandwidths must be > 0");
    require(oracle.d2d_radius_m > 0.0, "oracle.d2d_radius_m must be > 0");
    require(oracle.instruction_scale > 0.0, "oracle.instruction_scale must be > 0");
    require(tasks.ic_min_mi > 0.0 && tasks.ic_min_mi <= tasks.ic_max_mi, "tasks IC bounds");
    require(tasks.msg_min_mb > 0.0 && tasks.msg_min_mb <= tasks.msg_max_mb, "tasks message bounds");
    require(experience_count >= 1, "experiences.count must be >= 1");
    require(!models.empty(), "learner.models must not be empty");
    require(train_fraction > 0.0 && train_fraction < 1.0, "learner.train_fraction must lie in (0,1)");
    require(k_folds >= 2, "learner.k_folds must be >= 2");
    for (const auto& [v, g] : grids) {
        for (int n : g.n_trees) require(n >= 1, "grid n_trees must be >= 1");
        for (int n : g.n_stages) require(n >= 1, "grid n_stages must be >= 1");
        for (double lr : g.learning_rate) require(lr >= 0.0, "grid learning_rate must be >= 0");
        for (double ff : g.feature_fraction) require(ff > 0.0 && ff <= 1.0, "grid feature_fraction in (0,1]");
        for (int l : g.min_samples_leaf) require(l >= 1, "grid min_samples_leaf must be >= 1");
        for (int d : g.max_depth) require(d >= -1, "grid max_depth must be >= 0 or unbounded");
    }
}

std::string RunConfig::hash() const {
    json j = to_json();
    j["paths"].erase("out");  // output location does not change results
    return fmt::format("{:016x}", fnv1a64(j.dump()));
}

json RunConfig::stamp() const {
    json seeds = json::object();
    for (const auto& name : kSeedNames) seeds[name] = seed(name);
    return {{"config_hash", hash()}, {"master_seed", master_seed}, {"seeds", seeds}};
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto out = csv::open_for_write(path);
    out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, path.string());
    return json::parse(in);
}

// ---------------------------------------------------------------------------
// Stages

namespace {

std::filesystem::path artifact(const RunConfig& cfg, const std::string& name) { return cfg.out_dir / name; }

std::filesystem::path require_artifact(const RunConfig& cfg, const std::string& name) {
    auto p = artifact(cfg, name);
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingArtifact, p.string() + " (run the earlier stage)");
    return p;
}

}  // namespace

DatasetBundle stage_generate(const RunConfig& cfg) {
    DatasetBundle b;
    if (cfg.devices_path) {
        b.devices = load_devices(*cfg.devices_path);
    } else {
        b.devices = generate_synthetic_devices(cfg.n_devices, cfg.n_owners, cfg.geo_box, cfg.seed("devices"));
    }
    std::sort(b.devices.begin(), b.devices.end(), [](const Device& x, const Device& y) { return x.id < y.id; });

    std::int64_t n_owners = cfg.n_owners;
    if (cfg.devices_path) {
        n_owners = 0;
        for (const auto& d : b.devices) n_owners = std::max(n_owners, d.owner_id + 1);
    }
    if (cfg.n_owners_override) n_owners = *cfg.n_owners_override;
    if (cfg.owners_path) {
        b.owner_network = load_owner_network(*cfg.owners_path, n_owners);
    } else {
        b.owner_network = generate_owner_network(std::max<std::int64_t>(n_owners, cfg.ws_k + 1), cfg.ws_k,
                                                 cfg.ws_beta, cfg.seed("owners"));
    }

    if (cfg.meetings_path) {
        b.meetings = load_meetings(*cfg.meetings_path);
    } else {
        MeetingParams mp;
        mp.radius_m = cfg.oracle.d2d_radius_m;
        b.meetings = generate_meetings(b.devices, cfg.days, cfg.seed("meetings"), mp, cfg.geo_box);
    }
    b.validate();

    save_devices(artifact(cfg, "devices.csv"), b.devices);
    save_owner_network(artifact(cfg, "owners.csv"), b.owner_network);
    save_meetings(artifact(cfg, "meetings.csv"), b.meetings);
    write_json(artifact(cfg, "bundle.json"), {{"stamp", cfg.stamp()},
                                              {"n_devices", b.devices.size()},
                                              {"n_owners", b.owner_network.n_owners},
                                              {"n_owner_edges", b.owner_network.edges.size()},
                                              {"n_meetings", b.meetings.size()},
                                              {"source", cfg.devices_path ? "file" : "synthetic"}});
    return b;
}

DatasetBundle load_bundle(const RunConfig& cfg) {
    const auto meta = read_json(require_artifact(cfg, "bundle.json"));
    DatasetBundle b;
    b.devices = load_devices(require_artifact(cfg, "devices.csv"));
    b.owner_network = load_owner_network(require_artifact(cfg, "owners.csv"), meta.at("n_owners").get<std::int64_t>());
    b.meetings = load_meetings(require_artifact(cfg, "meetings.csv"));
    b.validate();
    return b;
}

const SocialGraph& RelationGraphs::get(RelationKind k) const {
    for (const auto& g : graphs) {
        if (g.kind() == k) return g;
    }
    throw Error(ErrorCode::MissingArtifact, fmt::format("no {} graph", to_string(k)));
}

RelationGraphs stage_build_graphs(const RunConfig& cfg, const DatasetBundle& bundle) {
    RelationGraphs rg;
    rg.graphs.push_back(build_clor(bundle.devices, cfg.clor_threshold_m));
    rg.graphs.push_back(build_sfor(bundle.devices, bundle.owner_network, cfg.sfor_max_hops));
    rg.graphs.push_back(build_sor(bundle.devices, bundle.meetings, cfg.sor_min_meetings, cfg.sor_min_duration_min));
    json summary = {{"stamp", cfg.stamp()}};
    for (const auto& g : rg.graphs) {
        g.save_edge_list(artifact(cfg, fmt::format("graph_{}.csv", to_string(g.kind()))));
        summary[std::string(to_string(g.kind()))] = {{"nodes", g.nodes().size()},
                                                     {"edges", g.edge_count()},
                                                     {"total_weight", g.total_weight()}};
    }
    write_json(artifact(cfg, "graphs.json"), summary);
    return rg;
}

RelationGraphs load_graphs(const RunConfig& cfg, const DatasetBundle& bundle) {
    std::vector<DeviceId> ids;
    for (const auto& d : bundle.devices) ids.push_back(d.id);
    RelationGraphs rg;
    for (auto k : {RelationKind::Clor, RelationKind::Sfor, RelationKind::Sor}) {
        rg.graphs.push_back(SocialGraph::load_edge_list(
            require_artifact(cfg, fmt::format("graph_{}.csv", to_string(k))), k, ids));
    }
    return rg;
}

std::vector<CommunityAssignment> stage_communities(const RunConfig& cfg, const RelationGraphs& graphs) {
    std::vector<CommunityAssignment> out;
    json summary = {{"stamp", cfg.stamp()}, {"others_min_size", cfg.others_min_size}};
    for (const auto& g : graphs.graphs) {
        CommunityAssignment a;
        json extra = json::object();
        if (g.total_weight() > 0.0) {
            a = louvain(g, cfg.seed("louvain"));
        } else {
            // no evidence for this relation: every device is its own community
            a.kind = g.kind();
            CommunityLabel next = 0;
            for (auto id : g.nodes()) a.labels[id] = next++;
            extra["warning"] = "graph has no edges; singleton communities";
        }
        a.save_csv(artifact(cfg, fmt::format("communities_{}.csv", to_string(g.kind()))));
        const auto sizes = summarize_sizes(a, cfg.others_min_size);
        json communities = json::array();
        for (const auto& e : sizes.communities) communities.push_back({{"label", e.label}, {"size", e.size}});
        json rel = {{"modularity", a.modularity},
                    {"level_modularity", a.level_modularity},
                    {"n_communities", a.communities().size()},
                    {"communities", communities},
                    {"others", {{"communities", sizes.others_communities}, {"devices", sizes.others_devices}}}};
        rel.update(extra);
        summary["relations"][std::string(to_string(g.kind()))] = rel;
        out.push_back(std::move(a));
    }
    write_json(artifact(cfg, "community_summary.json"), summary);
    return out;
}

std::vector<CommunityAssignment> load_communities(const RunConfig& cfg) {
    std::vector<CommunityAssignment> out;
    for (auto k : {RelationKind::Clor, RelationKind::Sfor, RelationKind::Sor}) {
        out.push_back(
            CommunityAssignment::load_csv(require_artifact(cfg, fmt::format("communities_{}.csv", to_string(k))), k));
    }
    return out;
}

std::vector<CommunityAssignment> select_relations(const RunConfig& cfg, const std::vector<CommunityAssignment>& all) {
    std::vector<CommunityAssignment> out;
    for (auto k : cfg.relations) {
        auto it = std::find_if(all.begin(), all.end(), [k](const auto& a) { return a.kind == k; });
        if (it == all.end()) throw Error(ErrorCode::MissingArtifact, fmt::format("no {} communities", to_string(k)));
        out.push_back(*it);
    }
    return out;
}

std::vector<SharingExperience> stage_simulate(const RunConfig& cfg, const DatasetBundle& bundle) {
    auto rows = generate_experiences(bundle.devices, cfg.experience_count, cfg.experience_mode,
                                     cfg.seed("experiences"), cfg.oracle, cfg.tasks);
    save_experiences(artifact(cfg, "experiences.csv"), rows);
    return rows;
}

std::vector<SharingExperience> load_experiences(const RunConfig& cfg) {
    return load_experiences(require_artifact(cfg, "experiences.csv"));
}

PreparedData prepare_data(const RunConfig& cfg, const std::vector<SharingExperience>& experiences) {
    std::vector<SharingExperience> usable;
    PreparedData d;
    for (const auto& e : experiences) {
        if (e.available()) {
            usable.push_back(e);
        } else {
            ++d.unavailable;
        }
    }
    auto [train_rows, test_rows] =
        learner::split_train_test<SharingExperience>(usable, cfg.train_fraction, cfg.seed("split"));
    const auto train_table = learner::experience_table(train_rows);
    d.schema = learner::fit_preprocessor(train_table);
    d.train = learner::transform(d.schema, train_table);
    d.test = learner::transform(d.schema, learner::experience_table(test_rows));
    return d;
}

TrainedModels stage_train(const RunConfig& cfg, const PreparedData& data) {
    TrainedModels out;
    const learner::ModelTrainer trainer(data.train);
    for (auto v : cfg.models) {
        auto it = cfg.grids.find(v);
        const auto grid = it != cfg.grids.end() ? it->second : learner::HyperGrid::defaults(v);
        auto search = learner::grid_search(data.train, v, grid, cfg.k_folds, cfg.seed("training"));
        auto model = trainer.fit(v, search.best, cfg.seed("training"));
        model.set_schema(data.schema);
        const auto name = std::string(learner::short_name(v));
        model.save(artifact(cfg, fmt::format("models/model_{}.json", name)));
        json cv = search.to_json();
        cv["stamp"] = cfg.stamp();
        write_json(artifact(cfg, fmt::format("models/cv_{}.json", name)), cv);
        out.models.emplace(v, std::move(model));
        out.searches.emplace(v, std::move(search));
    }
    return out;
}

std::map<ModelVariant, learner::RegressionModel> load_models(const RunConfig& cfg) {
    std::map<ModelVariant, learner::RegressionModel> out;
    for (auto v : cfg.models) {
        out.emplace(v, learner::RegressionModel::load(require_artifact(
                           cfg, fmt::format("models/model_{}.json", learner::short_name(v)))));
    }
    return out;
}

namespace {

double share_below(const std::vector<double>& v, double threshold) {
    if (v.empty()) return 0.0;
    const auto n = std::count_if(v.begin(), v.end(), [threshold](double x) { return x < threshold; });
    return 100.0 * static_cast<double>(n) / static_cast<double>(v.size());
}

}  // namespace

json stage_evaluate(const RunConfig& cfg, const PreparedData& data,
                    const std::map<ModelVariant, learner::RegressionModel>& models) {
    json report = {{"stamp", cfg.stamp()},
                   {"experience_mode", std::string(to_string(cfg.experience_mode))},
                   {"split",
                    {{"train_rows", data.train.rows},
                     {"test_rows", data.test.rows},
                     {"unavailable_excluded", data.unavailable}}}};
    auto samples = csv::open_for_write(artifact(cfg, "per_sample_pcd.csv"));
    samples << "model,sample,pcd_pct\n";
    for (const auto& [v, model] : models) {
        const auto eval = learner::evaluate(model, data.test);
        const auto sum_form = learner::evaluate(model, data.test, learner::PcdForm::Sum);
        const auto& ps = eval.seconds.per_sample_pcd;
        report["models"][std::string(learner::short_name(v))] = {
            {"variant", std::string(learner::to_string(v))},
            {"hyperparameters", learner::to_json(model.hyperparams())},
            {"pcd", eval.seconds.pcd},
            {"mse", eval.scaled.mse},
            {"mae", eval.scaled.mae},
            {"scaled", learner::to_json(eval.scaled)},
            {"seconds", learner::to_json(eval.seconds)},
            {"pcd_sum_form", sum_form.seconds.pcd},
            {"share_pcd_below_1pct", share_below(ps, 1.0)},
            {"share_pcd_below_5pct", share_below(ps, 5.0)},
        };
        for (std::size_t i = 0; i < ps.size(); ++i) {
            samples << fmt::format("{},{},{}\n", learner::short_name(v), i, ps[i]);
        }
    }
    write_json(artifact(cfg, "metrics.json"), report);
    return report;
}

std::vector<DeviceId> servable_requesters(const DatasetBundle& bundle, const std::vector<CommunityAssignment>& assignments,
                                          const AllocationPolicy& policy) {
    std::vector<DeviceId> out;
    for (const auto& d : bundle.devices) {
        auto try_mode = [&](CandidateMode mode) -> std::optional<CandidateSet> {
            try {
                return candidate_set(d.id, assignments, mode);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoCandidates) throw;
                return std::nullopt;
            }
        };
        auto set = try_mode(policy.mode);
        if (!set && policy.mode == CandidateMode::Intersection && policy.fallback_to_union) {
            set = try_mode(CandidateMode::Union);
        }
        if (!set) continue;
        const bool any = std::any_of(set->members.begin(), set->members.end(), [&](DeviceId id) {
            const Device* c = bundle.find(id);
            return c && c->can_compute();
        });
        if (any) out.push_back(d.id);
    }
    return out;
}

std::vector<AllocationResult> stage_allocate(const RunConfig& cfg, const DatasetBundle& bundle,
                                             const RelationGraphs& graphs,
                                             const std::vector<CommunityAssignment>& assignments,
                                             const learner::RegressionModel& model, std::size_t requests) {
    const auto trust = select_relations(cfg, assignments);
    const auto requesters = servable_requesters(bundle, trust, cfg.policy);
    if (requesters.empty()) throw Error(ErrorCode::NoCandidates, "no requester has a trusted computing peer");
    const ModelPredictor predictor(model, cfg.oracle);
    Rng rng(cfg.seed("allocation"));
    std::vector<AllocationResult> out;
    for (std::size_t i = 0; i < requests; ++i) {
        const auto requester = requesters[uniform_index(rng, requesters.size())];
        const auto task = sample_task(requester, cfg.tasks, rng);
        out.push_back(allocate(task, bundle, trust, graphs.graphs, predictor, cfg.policy, cfg.oracle));
    }
    json j = {{"stamp", cfg.stamp()}, {"model", std::string(learner::to_string(model.variant()))}};
    j["allocations"] = json::array();
    for (const auto& r : out) j["allocations"].push_back(to_json(r));
    write_json(artifact(cfg, "allocations.json"), j);
    auto table = csv::open_for_write(artifact(cfg, "allocations.txt"));
    table << table_header() << '\n';
    for (const auto& r : out) table << table_row(r, bundle) << '\n';
    return out;
}

std::vector<std::pair<double, double>> pcd_cdf(std::vector<double> per_sample_pcd) {
    std::sort(per_sample_pcd.begin(), per_sample_pcd.end());
    std::vector<std::pair<double, double>> out;
    const double n = static_cast<double>(per_sample_pcd.size());
    for (std::size_t i = 0; i < per_sample_pcd.size(); ++i) {
        // collapse ties so each PCD value appears once with its full cumulative share
        if (i + 1 < per_sample_pcd.size() && per_sample_pcd[i + 1] == per_sample_pcd[i]) continue;
        out.emplace_back(per_sample_pcd[i], 100.0 * static_cast<double>(i + 1) / n);
    }
    return out;
}

void stage_report(const RunConfig& cfg, const DatasetBundle& bundle, const std::vector<CommunityAssignment>& assignments) {
    const auto& types = all_device_types();
    for (const auto& a : assignments) {
        auto out = csv::open_for_write(artifact(cfg, fmt::format("community_types_{}.csv", to_string(a.kind))));
        out << "community,size";
        for (auto t : types) out << ',' << to_string(t);
        out << '\n';
        std::array<std::size_t, kDeviceTypeCount> others{};
        std::size_t others_size = 0;
        for (const auto& [label, members] : a.communities()) {
            std::array<std::size_t, kDeviceTypeCount> counts{};
            for (auto id : members) {
                const Device* d = bundle.find(id);
                if (!d) throw Error(ErrorCode::UnknownDevice, fmt::format("community member {}", id));
                ++counts[static_cast<std::size_t>(d->device_type)];
            }
            if (members.size() < cfg.others_min_size) {
                for (std::size_t t = 0; t < counts.size(); ++t) others[t] += counts[t];
                others_size += members.size();
                continue;
            }
            out << label << ',' << members.size();
            for (auto c : counts) out << ',' << c;
            out << '\n';
        }
        out << "others," << others_size;
        for (auto c : others) out << ',' << c;
        out << '\n';
    }

    std::map<std::string, std::vector<double>> by_model;
    csv::read(require_artifact(cfg, "per_sample_pcd.csv"), "model,sample,pcd_pct",
              [&](const std::vector<std::string_view>& f, std::size_t line) {
                  if (f.size() != 3) throw Error(ErrorCode::MalformedRow, fmt::format("line {}", line));
                  by_model[std::string(f[0])].push_back(csv::parse_double(f[2], line, "pcd_pct"));
              });
    auto out = csv::open_for_write(artifact(cfg, "pcd_cdf.csv"));
    out << "model,pcd_pct,cumulative_pct\n";
    for (const auto& [model, values] : by_model) {
        for (const auto& [pcd, cum] : pcd_cdf(values)) out << fmt::format("{},{},{}\n", model, pcd, cum);
    }
}

json run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    auto stage = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    };
    const auto bundle = stage("generate", [&] { return stage_generate(cfg); });
    const auto graphs = stage("build-graphs", [&] { return stage_build_graphs(cfg, bundle); });
    const auto assignments = stage("communities", [&] { return stage_communities(cfg, graphs); });
    const auto experiences = stage("simulate", [&] { return stage_simulate(cfg, bundle); });
    const auto data = stage("train", [&] { return prepare_data(cfg, experiences); });
    const auto trained = stage("train", [&] { return stage_train(cfg, data); });
    auto metrics = stage("evaluate", [&] { return stage_evaluate(cfg, data, trained.models); });
    stage("allocate", [&] {
        auto it = trained.models.find(ModelVariant::GradientBoosting);
        const auto& model = it != trained.models.end() ? it->second : trained.models.begin()->second;
        return stage_allocate(cfg, bundle, graphs, assignments, model, cfg.allocation_requests);
    });
    stage("report", [&] {
        stage_report(cfg, bundle, assignments);
        return 0;
    });
    write_json(artifact(cfg, "config.json"), cfg.to_json());
    return metrics;
}

}  // namespace siot
