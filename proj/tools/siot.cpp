// siot: command-line front end for the community-based edge allocation pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "siot/error.hpp"
#include "siot/pipeline.hpp"

namespace {

using siot::RunConfig;
namespace learner = siot::learner;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string models;
    std::string out;
    std::string devices;
    std::string experience_mode;

    std::optional<std::int64_t> requester;
    std::optional<double> ic;
    std::optional<double> msg;
    std::optional<std::size_t> requests;
    std::string model = "gbr";
    bool use_oracle = false;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

RunConfig resolve_config(const Flags& f) {
    RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    if (f.seed) cfg.master_seed = *f.seed;
    if (!f.mode.empty()) {
        auto m = siot::parse_candidate_mode(f.mode);
        if (!m) throw siot::ConfigError("--mode must be intersection or union");
        cfg.policy.mode = *m;
    }
    if (!f.models.empty()) {
        cfg.models.clear();
        for (const auto& name : split_list(f.models)) {
            auto v = learner::parse_model_variant(name);
            if (!v) throw siot::ConfigError("unknown model " + name + " (use dt, rf, gbr)");
            cfg.models.push_back(*v);
        }
    }
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (!f.devices.empty()) cfg.devices_path = f.devices;
    if (!f.experience_mode.empty()) {
        auto m = siot::parse_experience_mode(f.experience_mode);
        if (!m) throw siot::ConfigError("--experience-mode must be static or dynamic");
        cfg.experience_mode = *m;
    }
    if (f.ic && !(*f.ic > 0.0)) throw siot::ConfigError("--ic must be > 0");
    if (f.msg && !(*f.msg > 0.0)) throw siot::ConfigError("--msg must be > 0");
    if (f.requests && *f.requests == 0) throw siot::ConfigError("--requests must be >= 1");
    if (!learner::parse_model_variant(f.model)) throw siot::ConfigError("unknown model " + f.model);
    cfg.validate();
    return cfg;
}

template <class Fn>
void as_stage(const char* name, Fn&& fn) {
    try {
        fn();
    } catch (const siot::ConfigError&) {
        throw;
    } catch (const siot::StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw siot::StageError(name, e.what());
    }
}

void print_allocations(const std::vector<siot::AllocationResult>& results, const siot::DatasetBundle& bundle) {
    std::cout << siot::table_header() << '\n';
    for (const auto& r : results) std::cout << siot::table_row(r, bundle) << '\n';
}

void run_allocate(const RunConfig& cfg, const Flags& f) {
    const auto bundle = siot::load_bundle(cfg);
    const auto graphs = siot::load_graphs(cfg, bundle);
    const auto assignments = siot::load_communities(cfg);
    const auto variant = *learner::parse_model_variant(f.model);
    const auto model = learner::RegressionModel::load(
        cfg.out_dir / fmt::format("models/model_{}.json", learner::short_name(variant)));

    if (!f.requester) {
        if (f.use_oracle) throw siot::ConfigError("--oracle needs --requester");
        const auto results =
            siot::stage_allocate(cfg, bundle, graphs, assignments, model, f.requests.value_or(cfg.allocation_requests));
        print_allocations(results, bundle);
        return;
    }

    siot::TaskRequest task;
    task.requester_id = *f.requester;
    task.instruction_count_mi = f.ic.value_or(0.5 * (cfg.tasks.ic_min_mi + cfg.tasks.ic_max_mi));
    task.message_size_mb = f.msg.value_or(0.5 * (cfg.tasks.msg_min_mb + cfg.tasks.msg_max_mb));
    const auto trust = siot::select_relations(cfg, assignments);
    const siot::OraclePredictor oracle(cfg.oracle);
    const siot::ModelPredictor learned(model, cfg.oracle);
    const siot::RtPredictor& predictor = f.use_oracle ? static_cast<const siot::RtPredictor&>(oracle) : learned;
    const auto result = siot::allocate(task, bundle, trust, graphs.graphs, predictor, cfg.policy, cfg.oracle);

    nlohmann::json j = {{"stamp", cfg.stamp()},
                        {"model", f.use_oracle ? std::string("oracle") : std::string(learner::to_string(variant))},
                        {"allocations", nlohmann::json::array({siot::to_json(result)})}};
    siot::write_json(cfg.out_dir / "allocations.json", j);
    print_allocations({result}, bundle);
}

void announce(const RunConfig& cfg, const std::string& what) {
    std::cout << fmt::format("{} -> {} (config {})\n", what, cfg.out_dir.string(), cfg.hash());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Community-based trustworthy edge allocation for SIoT devices"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", f.seed, "master seed");
    app.add_option("--mode", f.mode, "candidate set mode: intersection|union");
    app.add_option("--models", f.models, "comma list of dt,rf,gbr");
    app.add_option("--out", f.out, "output directory");
    app.add_option("--devices", f.devices, "devices CSV to ingest instead of generating");
    app.add_option("--experience-mode", f.experience_mode, "static|dynamic");

    auto* generate = app.add_subcommand("generate", "generate or ingest devices, owners and meetings");
    auto* build = app.add_subcommand("build-graphs", "build CLOR, SFOR and SOR graphs");
    auto* communities = app.add_subcommand("communities", "Louvain communities per relation");
    auto* simulate = app.add_subcommand("simulate", "generate sharing experiences with the RT oracle");
    auto* train = app.add_subcommand("train", "grid search and train the configured models");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate trained models on the held-out split");
    auto* allocate = app.add_subcommand("allocate", "allocate tasks to trusted edge devices");
    auto* report = app.add_subcommand("report", "export community type tables and PCD CDFs");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage in order");

    allocate->add_option("--requester", f.requester, "requesting device id");
    allocate->add_option("--ic", f.ic, "instruction count (millions)");
    allocate->add_option("--msg", f.msg, "message size (Mb)");
    allocate->add_option("--requests", f.requests, "number of random requests");
    allocate->add_option("--model", f.model, "model used for prediction: dt|rf|gbr");
    allocate->add_flag("--oracle", f.use_oracle, "rank with the RT oracle instead of the model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    RunConfig cfg;
    try {
        cfg = resolve_config(f);
        std::filesystem::create_directories(cfg.out_dir / "models");
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (generate->parsed()) {
            as_stage("generate", [&] { siot::stage_generate(cfg); });
            announce(cfg, "generate");
        } else if (build->parsed()) {
            as_stage("build-graphs", [&] { siot::stage_build_graphs(cfg, siot::load_bundle(cfg)); });
            announce(cfg, "build-graphs");
        } else if (communities->parsed()) {
            as_stage("communities", [&] {
                const auto bundle = siot::load_bundle(cfg);
                siot::stage_communities(cfg, siot::load_graphs(cfg, bundle));
            });
            announce(cfg, "communities");
        } else if (simulate->parsed()) {
            as_stage("simulate", [&] { siot::stage_simulate(cfg, siot::load_bundle(cfg)); });
            announce(cfg, "simulate");
        } else if (train->parsed()) {
            as_stage("train", [&] {
                const auto data = siot::prepare_data(cfg, siot::load_experiences(cfg));
                siot::stage_train(cfg, data);
            });
            announce(cfg, "train");
        } else if (evaluate->parsed()) {
            as_stage("evaluate", [&] {
                const auto data = siot::prepare_data(cfg, siot::load_experiences(cfg));
                const auto metrics = siot::stage_evaluate(cfg, data, siot::load_models(cfg));
                for (const auto& [name, m] : metrics["models"].items()) {
                    std::cout << fmt::format("{:4} pcd={:.3f} mse={:.6f} mae={:.6f} pcd<5%={:.1f}%\n", name,
                                             m["pcd"].get<double>(), m["mse"].get<double>(), m["mae"].get<double>(),
                                             m["share_pcd_below_5pct"].get<double>());
                }
            });
        } else if (allocate->parsed()) {
            as_stage("allocate", [&] { run_allocate(cfg, f); });
        } else if (report->parsed()) {
            as_stage("report", [&] { siot::stage_report(cfg, siot::load_bundle(cfg), siot::load_communities(cfg)); });
            announce(cfg, "report");
        } else if (pipeline->parsed()) {
            const auto metrics = siot::run_pipeline(cfg);
            for (const auto& [name, m] : metrics["models"].items()) {
                std::cout << fmt::format("{:4} pcd={:.3f} mse={:.6f} mae={:.6f} pcd<5%={:.1f}%\n", name,
                                         m["pcd"].get<double>(), m["mse"].get<double>(), m["mae"].get<double>(),
                                         m["share_pcd_below_5pct"].get<double>());
            }
            announce(cfg, "pipeline");
        }
    } catch (const siot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const siot::StageError& e) {
        std::cerr << "stage " << e.what() << '\n';
        return 2;
    }
    return 0;
}
