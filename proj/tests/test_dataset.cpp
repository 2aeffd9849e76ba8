#include <doctest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "siot/dataset.hpp"
#include "siot/error.hpp"
#include "siot/geo.hpp"

using namespace siot;

namespace {

const char* kHeader =
    "id,owner_id,device_type,latitude,longitude,mobility,mode,brand,cpu_manufacturer,cores,cpi,clock_rate_ghz,"
    "ram_gb,availability_pct\n";

template <class Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("device file round trip keeps every field") {
    const auto dir = fixtures::temp_dir("devices");
    const auto devs = generate_synthetic_devices(2568, 1200, GeoBox{}, 1);
    save_devices(dir / "d.csv", devs);
    const auto back = load_devices(dir / "d.csv");
    CHECK(back.size() == 2568);
    CHECK(back == devs);
}

TEST_CASE("header-only device file loads as empty") {
    const auto dir = fixtures::temp_dir("header_only");
    fixtures::write_file(dir / "d.csv", kHeader);
    CHECK(load_devices(dir / "d.csv").empty());
}

TEST_CASE("device rows are validated") {
    const auto dir = fixtures::temp_dir("bad_rows");
    fixtures::write_file(dir / "a.csv", std::string(kHeader) +
                         "1,0,pc,43.46,-3.81,static,private,acme,intel,4,1.0,2.0,8,120\n");
    CHECK(code_of([&] { load_devices(dir / "a.csv"); }) == ErrorCode::OutOfRange);

    fixtures::write_file(dir / "b.csv", std::string(kHeader) + "1,0,pc,43.46,-3.81,static,private,acme,intel,4\n");
    CHECK(code_of([&] { load_devices(dir / "b.csv"); }) == ErrorCode::MalformedRow);

    fixtures::write_file(dir / "c.csv", std::string(kHeader) +
                         "1,0,pc,43.46,-3.81,static,private,acme,intel,4,1.0,2.0,8,50\n"
                         "1,0,pc,43.46,-3.81,static,private,acme,intel,4,1.0,2.0,8,50\n");
    CHECK(code_of([&] { load_devices(dir / "c.csv"); }) == ErrorCode::DuplicateId);

    fixtures::write_file(dir / "d.csv", std::string(kHeader) +
                         "1,0,drone,43.46,-3.81,static,private,acme,intel,4,1.0,2.0,8,50\n");
    CHECK(code_of([&] { load_devices(dir / "d.csv"); }) == ErrorCode::MalformedRow);
}

TEST_CASE("owner network: lattice, determinism, edge count") {
    SUBCASE("beta 0 is the ring lattice") {
        const auto net = generate_owner_network(10, 4, 0.0, 99);
        const auto adj = net.adjacency();
        for (const auto& row : adj) CHECK(row.size() == 4);
        CHECK(net.edges.size() == 20);
    }
    SUBCASE("same seed twice") {
        CHECK(generate_owner_network(10, 4, 0.3, 7).edges == generate_owner_network(10, 4, 0.3, 7).edges);
    }
    SUBCASE("beta 1 keeps n*k/2 edges") { CHECK(generate_owner_network(10, 4, 1.0, 3).edges.size() == 20); }
    SUBCASE("invalid parameters") {
        CHECK(code_of([] { generate_owner_network(4, 4, 0.1, 1); }) == ErrorCode::InvalidParams);
        CHECK(code_of([] { generate_owner_network(10, 3, 0.1, 1); }) == ErrorCode::InvalidParams);
        CHECK(code_of([] { generate_owner_network(10, 4, 1.5, 1); }) == ErrorCode::InvalidParams);
    }
}

TEST_CASE("owner network edge count is rewiring invariant") {
    Rng rng(17);
    for (int t = 0; t < 200; ++t) {
        const std::int64_t n = 6 + static_cast<std::int64_t>(uniform_index(rng, 200));
        int k = 2 * (1 + static_cast<int>(uniform_index(rng, 4)));
        if (k >= n) k = 2;
        const double beta = uniform(rng, 0.0, 1.0);
        const auto net = generate_owner_network(n, k, beta, t);
        REQUIRE(net.edges.size() == static_cast<std::size_t>(n * k / 2));
        std::set<std::pair<OwnerId, OwnerId>> seen;
        for (auto [a, b] : net.edges) {
            CHECK(a < b);
            CHECK(a >= 0);
            CHECK(b < n);
            CHECK(seen.insert({a, b}).second);
        }
    }
}

TEST_CASE("synthetic devices") {
    CHECK(code_of([] { generate_synthetic_devices(0, 10, GeoBox{}, 1); }) == ErrorCode::InvalidParams);

    const auto devs = generate_synthetic_devices(2568, 500, GeoBox{}, 1);
    CHECK(devs.size() == 2568);
    std::set<DeviceId> ids;
    for (const auto& d : devs) {
        CHECK_NOTHROW(validate_device(d));
        CHECK(d.owner_id >= 0);
        CHECK(d.owner_id < 500);
        CHECK(d.availability_pct >= availability_lower_bound(d.device_type));
        CHECK(d.availability_pct <= availability_upper_bound(d.device_type));
        ids.insert(d.id);
    }
    CHECK(ids.size() == devs.size());
    CHECK(generate_synthetic_devices(2568, 500, GeoBox{}, 1) == devs);
    CHECK(generate_synthetic_devices(2568, 500, GeoBox{}, 2) != devs);

    const bool any_pure_requester =
        std::any_of(devs.begin(), devs.end(), [](const Device& d) { return !d.can_compute(); });
    CHECK(any_pure_requester);
}

TEST_CASE("meetings between static devices") {
    auto a = fixtures::device(1);
    auto b = fixtures::device(2);
    const auto near = step_toward(a.location(), {a.latitude + 0.01, a.longitude}, 10.0);
    b.latitude = near.lat;
    b.longitude = near.lon;
    REQUIRE(geo_distance(a.location(), b.location()) == doctest::Approx(10.0).epsilon(1e-6));

    const auto ev = generate_meetings({a, b}, 10, 5);
    const auto long_ones = std::count_if(ev.begin(), ev.end(), [](const MeetingEvent& m) { return m.duration_min >= 30; });
    CHECK(long_ones >= 3);
    CHECK(generate_meetings({a, b}, 10, 5) == ev);

    auto far = fixtures::device(3);
    const auto p = step_toward(a.location(), {a.latitude + 1.0, a.longitude}, 10'000.0);
    far.latitude = p.lat;
    far.longitude = p.lon;
    CHECK(generate_meetings({a, far}, 10, 5).empty());
}

TEST_CASE("meeting file round trip and bundle cross references") {
    const auto dir = fixtures::temp_dir("meetings");
    auto devs = generate_synthetic_devices(200, 80, GeoBox{}, 4);
    const auto ev = generate_meetings(devs, 2, 4);
    save_meetings(dir / "m.csv", ev);
    CHECK(load_meetings(dir / "m.csv") == ev);

    DatasetBundle b{devs, generate_owner_network(80, 4, 0.1, 4), ev};
    CHECK_NOTHROW(b.validate());
    b.meetings.push_back({1, 100000, 0.0, 40.0});
    CHECK(code_of([&] { b.validate(); }) == ErrorCode::UnknownDevice);
    b.meetings.pop_back();
    b.devices[0].owner_id = 80;
    CHECK(code_of([&] { b.validate(); }) == ErrorCode::UnknownOwner);
}

TEST_CASE("owner network file round trip") {
    const auto dir = fixtures::temp_dir("owners");
    const auto net = generate_owner_network(50, 4, 0.2, 8);
    save_owner_network(dir / "o.csv", net);
    const auto back = load_owner_network(dir / "o.csv", 50);
    CHECK(back.n_owners == 50);
    CHECK(back.edges == net.edges);
}
