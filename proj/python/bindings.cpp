#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "siot/allocator.hpp"
#include "siot/community.hpp"
#include "siot/dataset.hpp"
#include "siot/error.hpp"
#include "siot/learner/metrics.hpp"
#include "siot/learner/model.hpp"
#include "siot/oracle.hpp"
#include "siot/pipeline.hpp"
#include "siot/social_graphs.hpp"

namespace py = pybind11;
using namespace siot;

namespace {

template <class T, class Parse>
T parse_or_throw(const std::string& s, Parse parse, const char* what) {
    auto v = parse(s);
    if (!v) throw py::value_error(std::string("unknown ") + what + ": " + s);
    return *v;
}

RelationKind relation(const std::string& s) { return parse_or_throw<RelationKind>(s, parse_relation_kind, "relation"); }

CommunityAssignment assignment_from(const std::string& kind, const std::map<DeviceId, CommunityLabel>& labels) {
    CommunityAssignment a;
    a.kind = relation(kind);
    a.labels = labels;
    return a;
}

py::dict assignment_dict(const CommunityAssignment& a) {
    py::dict d;
    d["kind"] = std::string(to_string(a.kind));
    d["labels"] = a.labels;
    d["modularity"] = a.modularity;
    d["level_modularity"] = a.level_modularity;
    return d;
}

RunConfig config_from(const std::string& config_json) {
    return RunConfig::from_json(nlohmann::json::parse(config_json.empty() ? "{}" : config_json));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Community-based trustworthy edge allocation for SIoT devices";

    auto& siot_error = py::register_exception<Error>(m, "SiotError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StageError>(m, "StageError", siot_error.ptr());

    py::class_<Device>(m, "Device")
        .def(py::init<>())
        .def_readwrite("id", &Device::id)
        .def_readwrite("owner_id", &Device::owner_id)
        .def_property(
            "device_type", [](const Device& d) { return std::string(to_string(d.device_type)); },
            [](Device& d, const std::string& s) {
                d.device_type = parse_or_throw<DeviceType>(s, parse_device_type, "device type");
            })
        .def_readwrite("latitude", &Device::latitude)
        .def_readwrite("longitude", &Device::longitude)
        .def_property(
            "mobility", [](const Device& d) { return std::string(to_string(d.mobility)); },
            [](Device& d, const std::string& s) { d.mobility = parse_or_throw<Mobility>(s, parse_mobility, "mobility"); })
        .def_property(
            "mode", [](const Device& d) { return std::string(to_string(d.mode)); },
            [](Device& d, const std::string& s) { d.mode = parse_or_throw<AccessMode>(s, parse_access_mode, "mode"); })
        .def_readwrite("brand", &Device::brand)
        .def_readwrite("cpu_manufacturer", &Device::cpu_manufacturer)
        .def_readwrite("cores", &Device::cores)
        .def_readwrite("cpi", &Device::cpi)
        .def_readwrite("clock_rate_ghz", &Device::clock_rate_ghz)
        .def_readwrite("ram_gb", &Device::ram_gb)
        .def_readwrite("availability_pct", &Device::availability_pct)
        .def("__eq__", [](const Device& a, const Device& b) { return a == b; })
        .def("__repr__", [](const Device& d) {
            return "<Device " + std::to_string(d.id) + " " + std::string(to_string(d.device_type)) + ">";
        });

    m.def("load_devices", &load_devices, py::arg("path"));
    m.def("save_devices", &save_devices, py::arg("path"), py::arg("devices"));
    m.def(
        "generate_devices",
        [](std::int64_t n, std::int64_t n_owners, std::uint64_t seed) {
            return generate_synthetic_devices(n, n_owners, GeoBox{}, seed);
        },
        py::arg("n"), py::arg("n_owners"), py::arg("seed"));
    m.def(
        "generate_owner_network",
        [](std::int64_t n, int k, double beta, std::uint64_t seed) { return generate_owner_network(n, k, beta, seed).edges; },
        py::arg("n"), py::arg("k"), py::arg("beta"), py::arg("seed"));
    m.def(
        "generate_meetings",
        [](const std::vector<Device>& devices, int days, std::uint64_t seed) {
            std::vector<std::tuple<DeviceId, DeviceId, double, double>> out;
            for (const auto& e : generate_meetings(devices, days, seed))
                out.emplace_back(e.device_a, e.device_b, e.start_time_s, e.duration_min);
            return out;
        },
        py::arg("devices"), py::arg("days"), py::arg("seed"));

    py::class_<SocialGraph>(m, "SocialGraph")
        .def(py::init([](const std::string& kind) { return SocialGraph(relation(kind)); }), py::arg("kind") = "sor")
        .def_property_readonly("kind", [](const SocialGraph& g) { return std::string(to_string(g.kind())); })
        .def("add_node", &SocialGraph::add_node)
        .def("set_edge", &SocialGraph::set_edge, py::arg("a"), py::arg("b"), py::arg("weight"))
        .def("weight", &SocialGraph::weight)
        .def_property_readonly("nodes", &SocialGraph::nodes)
        .def_property_readonly("edges", &SocialGraph::edges)
        .def("total_weight", &SocialGraph::total_weight)
        .def("__len__", [](const SocialGraph& g) { return g.edge_count(); });

    m.def("geo_distance", [](double lat1, double lon1, double lat2, double lon2) {
        return geo_distance({lat1, lon1}, {lat2, lon2});
    });
    m.def("build_clor", &build_clor, py::arg("devices"), py::arg("threshold_m") = 100.0);
    m.def(
        "build_sfor",
        [](const std::vector<Device>& devices, std::int64_t n_owners,
           const std::vector<std::pair<OwnerId, OwnerId>>& owner_edges, int max_hops) {
            OwnerNetwork net{n_owners, owner_edges};
            for (auto& [a, b] : net.edges)
                if (a > b) std::swap(a, b);
            std::sort(net.edges.begin(), net.edges.end());
            return build_sfor(devices, net, max_hops);
        },
        py::arg("devices"), py::arg("n_owners"), py::arg("owner_edges"), py::arg("max_hops") = 2);
    m.def(
        "build_sor",
        [](const std::vector<Device>& devices, const std::vector<std::tuple<DeviceId, DeviceId, double, double>>& ev,
           int min_meetings, double min_duration_min) {
            std::vector<MeetingEvent> meetings;
            for (const auto& [a, b, t, d] : ev) meetings.push_back({a, b, t, d});
            return build_sor(devices, meetings, min_meetings, min_duration_min);
        },
        py::arg("devices"), py::arg("meetings"), py::arg("min_meetings") = 3, py::arg("min_duration_min") = 30.0);

    m.def(
        "louvain", [](const SocialGraph& g, std::uint64_t seed) { return assignment_dict(louvain(g, seed)); },
        py::arg("graph"), py::arg("seed") = 0);
    m.def("modularity", &modularity, py::arg("graph"), py::arg("labels"));
    m.def(
        "candidate_set",
        [](DeviceId requester, const std::vector<std::pair<std::string, std::map<DeviceId, CommunityLabel>>>& labels,
           const std::string& mode) {
            std::vector<CommunityAssignment> as;
            for (const auto& [k, l] : labels) as.push_back(assignment_from(k, l));
            return candidate_set(requester, as, parse_or_throw<CandidateMode>(mode, parse_candidate_mode, "mode")).members;
        },
        py::arg("requester"), py::arg("assignments"), py::arg("mode") = "intersection");

    m.def(
        "response_time",
        [](double ic_mi, double msg_mb, const std::string& tech, double cpi, double clock_rate_ghz,
           double availability_pct) {
            if (tech != "d2d" && tech != "cellular") throw py::value_error("tech must be d2d or cellular");
            return response_time({0, ic_mi, msg_mb}, tech == "d2d" ? CommTech::D2d : CommTech::Cellular, cpi,
                                 clock_rate_ghz, availability_pct);
        },
        py::arg("ic_mi"), py::arg("msg_mb"), py::arg("tech"), py::arg("cpi"), py::arg("clock_rate_ghz"),
        py::arg("availability_pct"));

    m.def(
        "compute_metrics",
        [](const std::vector<double>& y, const std::vector<double>& yhat) {
            const auto r = learner::compute_metrics(y, yhat);
            py::dict d;
            d["pcd"] = r.pcd;
            d["mse"] = r.mse;
            d["mae"] = r.mae;
            d["per_sample_pcd"] = r.per_sample_pcd;
            return d;
        },
        py::arg("y"), py::arg("yhat"));

    py::class_<learner::RegressionModel>(m, "Model")
        .def_static("load", &learner::RegressionModel::load, py::arg("path"))
        .def_property_readonly("variant", [](const learner::RegressionModel& r) {
            return std::string(learner::short_name(r.variant()));
        })
        .def_property_readonly("columns", [](const learner::RegressionModel& r) { return r.schema().column_names(); })
        .def_property_readonly("tree_count", [](const learner::RegressionModel& r) { return r.trees().size(); })
        .def(
            "predict_scaled", [](const learner::RegressionModel& r, const std::vector<double>& x) { return r.predict(x); },
            py::arg("x"))
        .def(
            "predict_seconds",
            [](const learner::RegressionModel& r, const std::vector<double>& x) {
                return r.schema().unscale_target(r.predict(x));
            },
            py::arg("x"));

    m.def(
        "run_pipeline",
        [](const std::string& config_json, const std::string& out_dir) {
            auto cfg = config_from(config_json);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            cfg.validate();
            std::filesystem::create_directories(cfg.out_dir / "models");
            py::gil_scoped_release release;
            return run_pipeline(cfg).dump();
        },
        py::arg("config_json") = "", py::arg("out_dir") = "");
    m.def(
        "config_hash", [](const std::string& config_json) { return config_from(config_json).hash(); },
        py::arg("config_json") = "");
    m.def(
        "allocate",
        [](const std::string& config_json, const std::string& out_dir, DeviceId requester, double ic_mi,
           double msg_mb, bool use_oracle, const std::string& model) {
            auto cfg = config_from(config_json);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto bundle = load_bundle(cfg);
            const auto graphs = load_graphs(cfg, bundle);
            const auto trust = select_relations(cfg, load_communities(cfg));
            const auto variant = parse_or_throw<learner::ModelVariant>(model, learner::parse_model_variant, "model");
            const auto trained = learner::RegressionModel::load(
                cfg.out_dir / "models" / ("model_" + std::string(learner::short_name(variant)) + ".json"));
            const OraclePredictor oracle(cfg.oracle);
            const ModelPredictor learned(trained, cfg.oracle);
            const RtPredictor& p = use_oracle ? static_cast<const RtPredictor&>(oracle) : learned;
            return to_json(allocate({requester, ic_mi, msg_mb}, bundle, trust, graphs.graphs, p, cfg.policy, cfg.oracle))
                .dump();
        },
        py::arg("config_json"), py::arg("out_dir"), py::arg("requester"), py::arg("ic_mi"), py::arg("msg_mb"),
        py::arg("use_oracle") = false, py::arg("model") = "gbr");
}
