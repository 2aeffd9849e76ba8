#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "siot/error.hpp"
#include "siot/geo.hpp"
#include "siot/oracle.hpp"

using namespace siot;

namespace {

Device near(DeviceId id, const Device& origin, double meters) {
    auto d = fixtures::device(id);
    const auto p = step_toward(origin.location(), {origin.latitude + 0.5, origin.longitude}, meters);
    d.latitude = p.lat;
    d.longitude = p.lon;
    return d;
}

}  // namespace

TEST_CASE("haversine distance") {
    CHECK(geo_distance({43.4, -3.8}, {43.4, -3.8}) == 0.0);
    // pi * R / 180
    CHECK(geo_distance({0, 0}, {0, 1}) == doctest::Approx(111194.93).epsilon(1e-7));
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const GeoPoint a{uniform(rng, -80, 80), uniform(rng, -180, 180)};
        const GeoPoint b{uniform(rng, -80, 80), uniform(rng, -180, 180)};
        CHECK(geo_distance(a, b) == geo_distance(b, a));
    }
}

TEST_CASE("communication technology") {
    CHECK(comm_technology(10.0, 100.0) == CommTech::D2d);
    CHECK(comm_technology(100.0, 100.0) == CommTech::Cellular);
    CHECK(comm_technology(5000.0, 100.0) == CommTech::Cellular);
}

TEST_CASE("response time by hand") {
    const auto req = fixtures::device(1);
    auto edge = near(2, req, 50.0);
    edge.cpi = 1.0;
    edge.clock_rate_ghz = 1.0;
    edge.availability_pct = 100.0;
    const TaskRequest task{1, 1000.0, 1.0};
    CHECK(*response_time(req, task, edge) == doctest::Approx(1.05).epsilon(1e-12));

    edge.availability_pct = 0.0;
    CHECK_FALSE(response_time(req, task, edge).has_value());

    CHECK_THROWS_AS(response_time(req, TaskRequest{9, 1.0, 1.0}, edge), Error);
}

TEST_CASE("response time structure") {
    const TaskRequest task{1, 150.0, 2.0};
    const OracleParams p;
    const auto rt = [&](CommTech t, double r) { return *response_time(task, t, 1.2, r, 60.0, p); };
    const double transfer = 2 * p.cellular_latency_s + 2 * task.message_size_mb / p.cellular_bandwidth_mbps;
    const double proc1 = rt(CommTech::Cellular, 1.5) - transfer;
    const double proc2 = rt(CommTech::Cellular, 3.0) - transfer;
    CHECK(proc2 == doctest::Approx(proc1 / 2.0).epsilon(1e-12));

    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const TaskRequest t{1, uniform(rng, 1, 500), uniform(rng, 0.1, 10)};
        const double cpi = uniform(rng, 0.5, 2), r = uniform(rng, 0.5, 4), a = uniform(rng, 1, 100);
        for (auto tech : {CommTech::D2d, CommTech::Cellular}) {
            const double base = *response_time(t, tech, cpi, r, a);
            CHECK(base > 0.0);
            CHECK(std::isfinite(base));
            CHECK(*response_time({1, t.instruction_count_mi * 1.1, t.message_size_mb}, tech, cpi, r, a) > base);
            CHECK(*response_time({1, t.instruction_count_mi, t.message_size_mb * 1.1}, tech, cpi, r, a) > base);
            CHECK(*response_time(t, tech, cpi, r * 1.1, a) < base);
            CHECK(*response_time(t, tech, cpi, r, std::min(100.0, a * 1.1) + 1e-9) < base);
            CHECK(*response_time(t, tech, cpi, r, a) == base);
        }
        CHECK(*response_time(t, CommTech::Cellular, cpi, r, a) > *response_time(t, CommTech::D2d, cpi, r, a));
    }
}

TEST_CASE("experience generation") {
    const auto devs = generate_synthetic_devices(500, 250, GeoBox{}, 2);
    const auto rows = generate_experiences(devs, 10000, ExperienceMode::Dynamic, 11);
    CHECK(rows.size() == 10000);
    CHECK(generate_experiences(devs, 10000, ExperienceMode::Dynamic, 11) == rows);
    for (const auto& e : rows) {
        CHECK(e.requester_id != e.edge_id);
        CHECK(e.available() == (e.edge_availability_pct > 0.0));
        if (e.available()) CHECK(*e.observed_rt > 0.0);
    }

    const auto st = generate_experiences(devs, 3000, ExperienceMode::Static, 11);
    std::map<DeviceId, double> avail;
    for (const auto& e : st) {
        auto [it, fresh] = avail.emplace(e.edge_id, e.edge_availability_pct);
        if (!fresh) CHECK(it->second == e.edge_availability_pct);
    }

    CHECK_THROWS_AS(generate_experiences({devs[0]}, 10, ExperienceMode::Dynamic, 1), Error);
}

TEST_CASE("experience snapshot reproduces the oracle") {
    const auto devs = generate_synthetic_devices(100, 50, GeoBox{}, 6);
    for (const auto& e : generate_experiences(devs, 500, ExperienceMode::Dynamic, 6)) {
        const TaskRequest t{e.requester_id, e.instruction_count_mi, e.message_size_mb};
        const auto want = response_time(t, e.tech, e.edge_cpi, e.edge_clock_rate_ghz, e.edge_availability_pct);
        CHECK(want == e.observed_rt);
    }
}

TEST_CASE("experience file round trip") {
    const auto devs = generate_synthetic_devices(200, 100, GeoBox{}, 8);
    const auto rows = generate_experiences(devs, 1000, ExperienceMode::Dynamic, 8);
    const auto dir = fixtures::temp_dir("experiences");
    save_experiences(dir / "e.csv", rows);
    CHECK(load_experiences(dir / "e.csv") == rows);
}
