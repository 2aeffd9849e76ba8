#include <doctest.h>

#include <algorithm>
#include <vector>

#include "fixtures.hpp"
#include "siot/error.hpp"
#include "siot/geo.hpp"
#include "siot/social_graphs.hpp"

using namespace siot;

namespace {

Device at_offset(DeviceId id, const Device& origin, double meters, OwnerId owner = 0) {
    auto d = fixtures::device(id, owner);
    const auto p = step_toward(origin.location(), {origin.latitude, origin.longitude + 0.5}, meters);
    d.latitude = p.lat;
    d.longitude = p.lon;
    return d;
}

void check_graph_invariants(const SocialGraph& g) {
    for (const auto& [k, w] : g.edges()) {
        CHECK(k.first < k.second);
        CHECK(w > 0.0);
        CHECK(w <= 1.0);
        CHECK(g.weight(k.second, k.first) == w);
    }
}

// all-pairs hop counts by Floyd-Warshall
std::vector<std::vector<int>> apsp(const OwnerNetwork& net) {
    const auto n = static_cast<std::size_t>(net.n_owners);
    const int inf = 1 << 20;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
    for (auto [a, b] : net.edges) d[a][b] = d[b][a] = 1;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    return d;
}

}  // namespace

TEST_CASE("clor weights") {
    const auto a = fixtures::device(1);
    SUBCASE("identical coordinates") {
        const auto g = build_clor({a, fixtures::device(2)}, 100.0);
        CHECK(g.weight(1, 2) == 1.0);
    }
    SUBCASE("at threshold there is no edge") {
        const auto b = at_offset(2, a, 80.0);
        const double d = geo_distance(a.location(), b.location());
        CHECK_FALSE(build_clor({a, b}, d).weight(1, 2).has_value());
        CHECK(build_clor({a, b}, d * 1.000001).weight(1, 2).has_value());
    }
    SUBCASE("linear decay") {
        const auto b = at_offset(2, a, 250.0);
        const double d = geo_distance(a.location(), b.location());
        CHECK(d == doctest::Approx(250.0).epsilon(1e-4));
        CHECK(*build_clor({a, b}, 2.0 * d).weight(1, 2) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("every device is a node") {
        const auto g = build_clor({a, at_offset(2, a, 5000.0)}, 100.0);
        CHECK(g.nodes().size() == 2);
        CHECK(g.edge_count() == 0);
    }
}

TEST_CASE("clor: edge iff closer than threshold, weight decreasing in distance") {
    auto devs = generate_synthetic_devices(400, 200, GeoBox{43.455, 43.46, -3.81, -3.80}, 3);
    const auto g = build_clor(devs, 150.0);
    check_graph_invariants(g);
    std::vector<std::pair<double, double>> dw;
    for (std::size_t i = 0; i < devs.size(); ++i) {
        for (std::size_t j = i + 1; j < devs.size(); ++j) {
            const double d = geo_distance(devs[i].location(), devs[j].location());
            const auto w = g.weight(devs[i].id, devs[j].id);
            CHECK(w.has_value() == (d < 150.0));
            if (w) dw.emplace_back(d, *w);
        }
    }
    std::sort(dw.begin(), dw.end());
    for (std::size_t i = 1; i < dw.size(); ++i) {
        if (dw[i].first > dw[i - 1].first) CHECK(dw[i].second < dw[i - 1].second);
    }
}

TEST_CASE("sfor weights follow owner distance") {
    // owners 0-1-2-3 on a path
    const OwnerNetwork net{4, {{0, 1}, {1, 2}, {2, 3}}};
    std::vector<Device> devs = {fixtures::device(1, 0), fixtures::device(2, 0), fixtures::device(3, 1),
                                fixtures::device(4, 2), fixtures::device(5, 3)};
    const auto g = build_sfor(devs, net, 2);
    check_graph_invariants(g);
    CHECK(g.weight(1, 2) == 1.0);
    CHECK(g.weight(1, 3) == 0.5);
    CHECK(g.weight(1, 4) == 0.25);
    CHECK_FALSE(g.weight(1, 5).has_value());
    CHECK(g.weight(3, 5) == 0.25);
    CHECK(build_sfor(devs, net, 3).weight(1, 5) == doctest::Approx(0.5 / 3.0));

    devs.push_back(fixtures::device(6, 9));
    CHECK_THROWS_AS(build_sfor(devs, net, 2), Error);
}

TEST_CASE("sor qualification") {
    std::vector<Device> devs;
    for (DeviceId i = 1; i <= 6; ++i) devs.push_back(fixtures::device(i));
    std::vector<MeetingEvent> ev;
    auto meet = [&](DeviceId a, DeviceId b, int times, double minutes) {
        for (int k = 0; k < times; ++k) ev.push_back({a, b, 3600.0 * k, minutes});
    };
    meet(1, 2, 2, 60.0);
    meet(3, 4, 3, 30.0);
    meet(5, 6, 10, 45.0);
    meet(1, 3, 5, 29.0);  // too short
    meet(2, 1, 1, 60.0);  // reversed pair counts for the same edge
    const auto g = build_sor(devs, ev, 3, 30.0);
    check_graph_invariants(g);
    CHECK(g.weight(1, 2) == 0.5);
    CHECK(g.weight(3, 4) == 0.5);
    CHECK(g.weight(5, 6) == 1.0);
    CHECK_FALSE(g.weight(1, 3).has_value());

    ev.push_back({1, 99, 0.0, 60.0});
    CHECK_THROWS_AS(build_sor(devs, ev, 3, 30.0), Error);
}

TEST_CASE("sor weight is non-decreasing in meeting count") {
    std::vector<Device> devs = {fixtures::device(1), fixtures::device(2)};
    double prev = 0.0;
    for (int c = 3; c <= 12; ++c) {
        std::vector<MeetingEvent> ev;
        for (int k = 0; k < c; ++k) ev.push_back({1, 2, 60.0 * k, 30.0});
        const double w = *build_sor(devs, ev).weight(1, 2);
        CHECK(w >= prev);
        prev = w;
    }
}

TEST_CASE("owner hop distance matches all-pairs shortest paths") {
    SUBCASE("five-node toy") {
        // 0-1-2, 2-3, 1-3, 4 isolated
        const OwnerNetwork net{5, {{0, 1}, {1, 2}, {2, 3}, {1, 3}}};
        CHECK(owner_hop_distance(net, 2, 2) == 0);
        CHECK(owner_hop_distance(net, 0, 1) == 1);
        CHECK(owner_hop_distance(net, 0, 2) == 2);
        CHECK(owner_hop_distance(net, 0, 4) == kUnreachable);
        const auto d = apsp(net);
        for (OwnerId a = 0; a < 4; ++a)
            for (OwnerId b = 0; b < 4; ++b) CHECK(owner_hop_distance(net, a, b) == d[a][b]);
    }
    SUBCASE("random small worlds") {
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto net = generate_owner_network(30, 2, 0.5, s);
            const auto d = apsp(net);
            const auto adj = net.adjacency();
            for (OwnerId a = 0; a < 30; ++a) {
                const auto bounded = owner_hop_distances(adj, a, 3);
                for (OwnerId b = 0; b < 30; ++b) {
                    const int want = d[a][b] >= (1 << 20) ? kUnreachable : d[a][b];
                    CHECK(owner_hop_distance(net, a, b) == want);
                    CHECK(bounded[b] == (want <= 3 ? want : kUnreachable));
                }
            }
        }
    }
}

TEST_CASE("graph basics and edge list round trip") {
    SocialGraph g(RelationKind::Sor);
    CHECK_THROWS_AS(g.set_edge(1, 1, 0.5), Error);
    CHECK_THROWS_AS(g.set_edge(1, 2, 0.0), Error);
    CHECK_THROWS_AS(g.set_edge(1, 2, 1.5), Error);
    g.set_edge(3, 1, 0.5);
    g.set_edge(2, 3, 1.0);
    g.add_node(7);
    CHECK(g.has_node(1));
    CHECK(g.has_node(7));
    CHECK(g.total_weight() == 1.5);

    const auto dir = fixtures::temp_dir("edges");
    g.save_edge_list(dir / "g.csv");
    const auto back = SocialGraph::load_edge_list(dir / "g.csv", RelationKind::Sor, g.nodes());
    CHECK(back.edges() == g.edges());
    CHECK(back.nodes() == g.nodes());
}

TEST_CASE("graph builders are deterministic") {
    const auto devs = generate_synthetic_devices(300, 150, GeoBox{}, 9);
    const auto net = generate_owner_network(150, 4, 0.1, 9);
    const auto ev = generate_meetings(devs, 3, 9);
    CHECK(build_clor(devs, 100.0).edges() == build_clor(devs, 100.0).edges());
    CHECK(build_sfor(devs, net).edges() == build_sfor(devs, net).edges());
    CHECK(build_sor(devs, ev).edges() == build_sor(devs, ev).edges());
    check_graph_invariants(build_sfor(devs, net));
    check_graph_invariants(build_sor(devs, ev));
}
