// Acceptance checks over full seeded pipeline runs. One PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "siot/allocator.hpp"
#include "siot/community.hpp"
#include "siot/error.hpp"
#include "siot/learner/metrics.hpp"
#include "siot/pipeline.hpp"
#include "siot/rng.hpp"
#include "siot/social_graphs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// tolerances and thresholds
constexpr double kRuntimeBudgetS = 600.0;
constexpr double kGbrShareFloorPct = 80.0;
constexpr double kPcdThresholdPct = 5.0;
constexpr std::size_t kOracleRequests = 100;
constexpr std::size_t kTop3Requests = 200;
constexpr double kTop3FloorPct = 90.0;
constexpr double kModularityTol = 1e-9;
constexpr double kMetricTol = 1e-9;
constexpr std::size_t kRandomGraphs = 50;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::cout << fmt::format("[{}] criterion {} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
    if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    siot::RunConfig cfg;
    json metrics;
    double seconds = 0.0;
};

Run run_seed(std::uint64_t seed, siot::ExperienceMode mode, const fs::path& out) {
    Run r;
    r.cfg.master_seed = seed;
    r.cfg.experience_mode = mode;
    r.cfg.out_dir = out;
    fs::remove_all(out);
    fs::create_directories(out / "models");
    const auto t0 = std::chrono::steady_clock::now();
    r.metrics = siot::run_pipeline(r.cfg);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

double model_pcd(const json& metrics, const char* m) { return metrics["models"][m]["pcd"].get<double>(); }
double gbr_share(const json& metrics) { return metrics["models"]["gbr"]["share_pcd_below_5pct"].get<double>(); }

// candidate set computed straight from the label maps
std::set<siot::DeviceId> brute_candidates(siot::DeviceId r, const std::vector<siot::CommunityAssignment>& trust,
                                          siot::CandidateMode mode) {
    std::vector<std::set<siot::DeviceId>> per;
    for (const auto& a : trust) {
        std::set<siot::DeviceId> s;
        auto it = a.labels.find(r);
        if (it != a.labels.end()) {
            for (const auto& [id, c] : a.labels) {
                if (c == it->second && id != r) s.insert(id);
            }
        }
        per.push_back(s);
    }
    std::set<siot::DeviceId> out = per.front();
    for (std::size_t i = 1; i < per.size(); ++i) {
        std::set<siot::DeviceId> next;
        if (mode == siot::CandidateMode::Union) {
            std::set_union(out.begin(), out.end(), per[i].begin(), per[i].end(), std::inserter(next, next.end()));
        } else {
            std::set_intersection(out.begin(), out.end(), per[i].begin(), per[i].end(),
                                  std::inserter(next, next.end()));
        }
        out = next;
    }
    return out;
}

std::set<siot::DeviceId> trusted_with_fallback(siot::DeviceId r, const std::vector<siot::CommunityAssignment>& trust,
                                               const siot::AllocationPolicy& policy) {
    auto s = brute_candidates(r, trust, policy.mode);
    if (s.empty() && policy.fallback_to_union && policy.mode == siot::CandidateMode::Intersection) {
        s = brute_candidates(r, trust, siot::CandidateMode::Union);
    }
    return s;
}

// oracle RT of every computing candidate, sorted ascending with id tie-break
std::vector<std::pair<double, siot::DeviceId>> oracle_ranking(const siot::DatasetBundle& b,
                                                              const siot::TaskRequest& task,
                                                              const std::set<siot::DeviceId>& cands,
                                                              const siot::OracleParams& p) {
    const siot::Device& req = *b.find(task.requester_id);
    std::vector<std::pair<double, siot::DeviceId>> out;
    for (auto id : cands) {
        const siot::Device& e = *b.find(id);
        if (e.availability_pct <= 0.0) continue;
        const double d = siot::geo_distance(req.location(), e.location());
        const bool d2d = d < p.d2d_radius_m;
        const double lat = d2d ? p.d2d_latency_s : p.cellular_latency_s;
        const double bw = d2d ? p.d2d_bandwidth_mbps : p.cellular_bandwidth_mbps;
        const double proc = task.instruction_count_mi * p.instruction_scale * e.cpi /
                            (e.clock_rate_ghz * 1e9 * e.availability_pct / 100.0);
        out.emplace_back(2 * lat + 2 * task.message_size_mb / bw + proc, id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void criteria_1_2(const std::vector<Run>& dynamic_runs, const std::vector<Run>& static_runs) {
    bool order_ok = true, time_ok = true;
    std::string detail;
    for (const auto& r : dynamic_runs) {
        const double dt = model_pcd(r.metrics, "dt"), rf = model_pcd(r.metrics, "rf"),
                     gbr = model_pcd(r.metrics, "gbr");
        order_ok = order_ok && gbr < rf && rf < dt;
        time_ok = time_ok && r.seconds < kRuntimeBudgetS;
        detail += fmt::format("seed {}: gbr {:.3f} < rf {:.3f} < dt {:.3f} ({:.0f} s); ", r.cfg.master_seed, gbr,
                              rf, dt, r.seconds);
    }
    report(1, "model ordering", order_ok && time_ok, detail + fmt::format("budget {:.0f} s", kRuntimeBudgetS));

    bool ok = true;
    detail.clear();
    for (std::size_t i = 0; i < dynamic_runs.size(); ++i) {
        const double dyn = gbr_share(dynamic_runs[i].metrics), sta = gbr_share(static_runs[i].metrics);
        ok = ok && dyn >= kGbrShareFloorPct && sta >= dyn;
        detail += fmt::format("seed {}: dynamic {:.1f}% static {:.1f}%; ", dynamic_runs[i].cfg.master_seed, dyn, sta);
    }
    report(2, "GBR accuracy", ok,
           detail + fmt::format("need dynamic >= {:.0f}% below {:.0f}% PCD and static >= dynamic", kGbrShareFloorPct,
                                kPcdThresholdPct));
}

void criteria_3_4(const Run& run) {
    const auto& cfg = run.cfg;
    const auto bundle = siot::load_bundle(cfg);
    const auto graphs = siot::load_graphs(cfg, bundle);
    const auto trust = siot::select_relations(cfg, siot::load_communities(cfg));
    const auto models = siot::load_models(cfg);
    const auto& gbr = models.at(siot::learner::ModelVariant::GradientBoosting);

    std::vector<siot::DeviceId> servable;
    for (const auto& d : bundle.devices) {
        const auto ranking = oracle_ranking(bundle, {d.id, 1.0, 1.0}, trusted_with_fallback(d.id, trust, cfg.policy),
                                            cfg.oracle);
        if (!ranking.empty()) servable.push_back(d.id);
    }

    const siot::OraclePredictor oracle(cfg.oracle);
    siot::Rng rng(siot::derive_seed(cfg.master_seed, "acceptance-oracle"));
    std::size_t agree = 0;
    for (std::size_t i = 0; i < kOracleRequests; ++i) {
        // requests from any device, so failures must agree too
        const auto& dev = bundle.devices[siot::uniform_index(rng, bundle.devices.size())];
        const auto task = siot::sample_task(dev.id, cfg.tasks, rng);
        const auto ranking = oracle_ranking(bundle, task, trusted_with_fallback(dev.id, trust, cfg.policy), cfg.oracle);
        std::optional<siot::DeviceId> got;
        try {
            got = siot::allocate(task, bundle, trust, graphs.graphs, oracle, cfg.policy).edge_id;
        } catch (const siot::Error&) {
        }
        const std::optional<siot::DeviceId> want =
            ranking.empty() ? std::nullopt : std::optional<siot::DeviceId>(ranking.front().second);
        if (got == want) ++agree;
    }
    report(3, "oracle equivalence", agree == kOracleRequests,
           fmt::format("{}/{} requests match brute-force argmin", agree, kOracleRequests));

    const siot::ModelPredictor learned(gbr, cfg.oracle);
    siot::Rng rng4(siot::derive_seed(cfg.master_seed, "acceptance-top3"));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < kTop3Requests; ++i) {
        const auto requester = servable[siot::uniform_index(rng4, servable.size())];
        const auto task = siot::sample_task(requester, cfg.tasks, rng4);
        const auto ranking = oracle_ranking(bundle, task, trusted_with_fallback(requester, trust, cfg.policy), cfg.oracle);
        const auto chosen = siot::allocate(task, bundle, trust, graphs.graphs, learned, cfg.policy).edge_id;
        const std::size_t top = std::min<std::size_t>(3, ranking.size());
        for (std::size_t k = 0; k < top; ++k) {
            if (ranking[k].second == chosen) {
                ++hits;
                break;
            }
        }
    }
    const double pct = 100.0 * static_cast<double>(hits) / static_cast<double>(kTop3Requests);
    report(4, "learned allocation quality", pct >= kTop3FloorPct,
           fmt::format("{}/{} ({:.1f}%) GBR choices in the oracle top-3, need >= {:.0f}%", hits, kTop3Requests, pct,
                       kTop3FloorPct));
}

siot::SocialGraph two_triangles_bridge() {
    siot::SocialGraph g(siot::RelationKind::Sor);
    for (siot::DeviceId i = 1; i <= 6; ++i) g.add_node(i);
    for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 2}, {2, 3}, {1, 3}, {4, 5}, {5, 6}, {4, 6}, {3, 4}}) {
        g.set_edge(a, b, 1.0);
    }
    return g;
}

void criterion_5() {
    const auto g = two_triangles_bridge();
    const auto a = siot::louvain(g);
    const bool split = a.labels.at(1) == a.labels.at(2) && a.labels.at(2) == a.labels.at(3) &&
                       a.labels.at(4) == a.labels.at(5) && a.labels.at(5) == a.labels.at(6) &&
                       a.labels.at(1) != a.labels.at(4);
    const double q_err = std::abs(a.modularity - 5.0 / 14.0);

    // exhaustive optimum over all set partitions of the 6 nodes
    double best = -1.0;
    std::vector<int> rgs(6, 0);
    std::function<void(int, int)> walk = [&](int i, int max_label) {
        if (i == 6) {
            std::map<siot::DeviceId, siot::CommunityLabel> labels;
            for (int k = 0; k < 6; ++k) labels[k + 1] = rgs[k];
            best = std::max(best, siot::modularity(g, labels));
            return;
        }
        for (int l = 0; l <= max_label + 1; ++l) {
            rgs[i] = l;
            walk(i + 1, std::max(max_label, l));
        }
    };
    walk(1, 0);

    std::size_t ok_graphs = 0;
    siot::Rng rng(5);
    for (std::size_t t = 0; t < kRandomGraphs; ++t) {
        siot::SocialGraph r(siot::RelationKind::Clor);
        const int n = 10 + static_cast<int>(siot::uniform_index(rng, 60));
        for (int i = 0; i < n; ++i) r.add_node(i);
        const double p = siot::uniform(rng, 0.05, 0.3);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (siot::uniform(rng, 0.0, 1.0) < p) r.set_edge(i, j, siot::uniform(rng, 0.01, 1.0));
            }
        }
        if (r.edge_count() == 0) r.set_edge(0, 1, 1.0);
        const auto res = siot::louvain(r, t);
        bool ok = std::is_sorted(res.level_modularity.begin(), res.level_modularity.end());
        std::map<siot::DeviceId, siot::CommunityLabel> singles;
        for (auto id : r.nodes()) singles[id] = id;
        ok = ok && res.modularity >= siot::modularity(r, singles);
        if (ok) ++ok_graphs;
    }
    report(5, "Louvain correctness",
           split && q_err <= kModularityTol && std::abs(best - 5.0 / 14.0) <= kModularityTol &&
               ok_graphs == kRandomGraphs,
           fmt::format("two-triangle split {}, |Q - 5/14| = {:.2e}, exhaustive optimum {:.12f}, {}/{} random graphs "
                       "monotone and >= singleton",
                       split ? "yes" : "no", q_err, best, ok_graphs, kRandomGraphs));
}

void criterion_6() {
    const std::vector<double> y = {1.0}, yhat = {1.5};
    const auto r = siot::learner::compute_metrics(y, yhat);
    const std::vector<double> yy = {0.3, 2.0, 7.5};
    const auto p = siot::learner::compute_metrics(yy, yy);
    const bool ok = std::abs(r.pcd - 40.0) <= kMetricTol && std::abs(r.mse - 0.25) <= kMetricTol &&
                    std::abs(r.mae - 0.5) <= kMetricTol && p.pcd == 0.0 && p.mse == 0.0 && p.mae == 0.0;
    report(6, "metric fidelity", ok,
           fmt::format("pcd {:.12f} mse {:.12f} mae {:.12f}; perfect case {} {} {}", r.pcd, r.mse, r.mae, p.pcd,
                       p.mse, p.mae));
}

siot::Device fixture_device(siot::DeviceId id, siot::OwnerId owner, double lat, double lon) {
    siot::Device d;
    d.id = id;
    d.owner_id = owner;
    d.latitude = lat;
    d.longitude = lon;
    d.availability_pct = 50.0;
    return d;
}

void criterion_7() {
    // owners 0-1-2-3 on a path; devices 1,2 share owner 0
    std::vector<siot::Device> devs = {fixture_device(1, 0, 0, 0), fixture_device(2, 0, 0, 0),
                                      fixture_device(3, 1, 0, 0), fixture_device(4, 2, 0, 0),
                                      fixture_device(5, 3, 0, 0)};
    siot::OwnerNetwork net{4, {{0, 1}, {1, 2}, {2, 3}}};
    const auto sfor = siot::build_sfor(devs, net, 2);
    const bool sfor_ok = sfor.weight(1, 2) == 1.0 && sfor.weight(1, 3) == 0.5 && sfor.weight(1, 4) == 0.25 &&
                         !sfor.weight(1, 5).has_value();

    std::vector<siot::MeetingEvent> meetings;
    for (int k = 0; k < 2; ++k) meetings.push_back({1, 2, 3600.0 * k, 30.0});
    for (int k = 0; k < 3; ++k) meetings.push_back({3, 4, 3600.0 * k, 45.0});
    const auto sor = siot::build_sor(devs, meetings, 3, 30.0);
    const bool sor_ok = !sor.weight(1, 2).has_value() && sor.weight(3, 4) == 0.5;
    report(7, "relation rules", sfor_ok && sor_ok,
           fmt::format("sfor same-owner/h1/h2/h3 = {}/{}/{}/{}; sor 2 meetings {}, 3 meetings {}",
                       sfor.weight(1, 2).value_or(0), sfor.weight(1, 3).value_or(0), sfor.weight(1, 4).value_or(0),
                       sfor.weight(1, 5) ? "edge" : "none", sor.weight(1, 2) ? "edge" : "none",
                       sor.weight(3, 4).value_or(0)));
}

void criterion_8(const Run& first, const fs::path& out) {
    siot::RunConfig cfg = first.cfg;
    cfg.out_dir = out;
    fs::remove_all(out);
    fs::create_directories(out / "models");
    siot::run_pipeline(cfg);
    bool ok = true;
    std::string detail;
    for (const char* name : {"metrics.json", "allocations.json", "allocations.txt", "per_sample_pcd.csv"}) {
        const bool same = slurp(first.cfg.out_dir / name) == slurp(out / name) && !slurp(out / name).empty();
        ok = ok && same;
        if (!detail.empty()) detail += "; ";
        detail += fmt::format("{} {}", name, same ? "identical" : "DIFFERS");
    }
    report(8, "determinism", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "siot_acceptance";
    try {
        criterion_5();
        criterion_6();
        criterion_7();

        std::vector<Run> dyn, sta;
        for (auto s : kSeeds) {
            dyn.push_back(run_seed(s, siot::ExperienceMode::Dynamic, root / fmt::format("dynamic_{}", s)));
            sta.push_back(run_seed(s, siot::ExperienceMode::Static, root / fmt::format("static_{}", s)));
        }
        criteria_1_2(dyn, sta);
        criteria_3_4(dyn.front());
        criterion_8(dyn.front(), root / "rerun_1");
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance aborted: " << e.what() << '\n';
        return 1;
    }
    std::cout << fmt::format("{} criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
