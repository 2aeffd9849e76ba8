#include "siot/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "csv.hpp"
#include "siot/error.hpp"
#include "siot/rng.hpp"

namespace siot {

namespace {

constexpr std::array<DeviceType, kDeviceTypeCount> kAllTypes = {
    DeviceType::Smartphone, DeviceType::Pc,         DeviceType::Tablet,       DeviceType::Smartwatch,
    DeviceType::Car,        DeviceType::Transportation, DeviceType::HomeSensor, DeviceType::Printer,
    DeviceType::SmartFitness, DeviceType::Indicator, DeviceType::Alarm,        DeviceType::StreetLight,
    DeviceType::Parking,
};

constexpr std::array<std::string_view, kDeviceTypeCount> kTypeNames = {
    "smartphone", "pc",           "tablet",    "smartwatch", "car",          "transportation", "home_sensor",
    "printer",    "smart_fitness", "indicator", "alarm",      "street_light", "parking",
};

constexpr char kDeviceHeader[] =
    "id,owner_id,device_type,latitude,longitude,mobility,mode,brand,cpu_manufacturer,cores,cpi,clock_rate_ghz,"
    "ram_gb,availability_pct";
constexpr char kMeetingHeader[] = "device_a,device_b,start_time_s,duration_min";
constexpr char kOwnerHeader[] = "owner_a,owner_b";

}  // namespace

std::string_view to_string(DeviceType t) { return kTypeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(Mobility m) { return m == Mobility::Static ? "static" : "mobile"; }
std::string_view to_string(AccessMode m) { return m == AccessMode::Private ? "private" : "public"; }

std::optional<DeviceType> parse_device_type(std::string_view s) {
    for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
        if (kTypeNames[i] == s) return kAllTypes[i];
    }
    return std::nullopt;
}

std::optional<Mobility> parse_mobility(std::string_view s) {
    if (s == "static") return Mobility::Static;
    if (s == "mobile") return Mobility::Mobile;
    return std::nullopt;
}

std::optional<AccessMode> parse_access_mode(std::string_view s) {
    if (s == "private") return AccessMode::Private;
    if (s == "public") return AccessMode::Public;
    return std::nullopt;
}

const std::array<DeviceType, kDeviceTypeCount>& all_device_types() { return kAllTypes; }

std::vector<std::vector<OwnerId>> OwnerNetwork::adjacency() const {
    std::vector<std::vector<OwnerId>> adj(static_cast<std::size_t>(n_owners));
    for (auto [a, b] : edges) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    return adj;
}

void validate_device(const Device& d) {
    auto fail = [&](std::string_view field, double value) {
        throw Error(ErrorCode::OutOfRange, fmt::format("device {}: {} = {}", d.id, field, value));
    };
    if (!(d.availability_pct >= 0.0 && d.availability_pct <= 100.0)) fail("availability_pct", d.availability_pct);
    if (!(d.latitude >= -90.0 && d.latitude <= 90.0)) fail("latitude", d.latitude);
    if (!(d.longitude >= -180.0 && d.longitude <= 180.0)) fail("longitude", d.longitude);
    if (!(d.cpi > 0.0) || !std::isfinite(d.cpi)) fail("cpi", d.cpi);
    if (!(d.clock_rate_ghz > 0.0) || !std::isfinite(d.clock_rate_ghz)) fail("clock_rate_ghz", d.clock_rate_ghz);
    if (!(d.ram_gb > 0.0) || !std::isfinite(d.ram_gb)) fail("ram_gb", d.ram_gb);
    if (d.cores < 1) fail("cores", d.cores);
}

void DatasetBundle::validate() const {
    std::unordered_set<DeviceId> ids;
    for (const auto& d : devices) {
        if (d.owner_id < 0 || d.owner_id >= owner_network.n_owners) {
            throw Error(ErrorCode::UnknownOwner, fmt::format("device {} references owner {}", d.id, d.owner_id));
        }
        ids.insert(d.id);
    }
    for (const auto& m : meetings) {
        if (!ids.count(m.device_a)) throw Error(ErrorCode::UnknownDevice, fmt::format("meeting device {}", m.device_a));
        if (!ids.count(m.device_b)) throw Error(ErrorCode::UnknownDevice, fmt::format("meeting device {}", m.device_b));
    }
}

const Device* DatasetBundle::find(DeviceId id) const {
    auto it = std::lower_bound(devices.begin(), devices.end(), id,
                               [](const Device& d, DeviceId v) { return d.id < v; });
    if (it != devices.end() && it->id == id) return &*it;
    // devices loaded from an unsorted file
    for (const auto& d : devices) {
        if (d.id == id) return &d;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<Device> load_devices(const std::filesystem::path& path) {
    std::vector<Device> out;
    std::unordered_set<DeviceId> seen;
    csv::read(path, kDeviceHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
        if (f.size() != 14) {
            throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 14 fields, got {}", line, f.size()));
        }
        Device d;
        d.id = csv::parse_int(f[0], line, "id");
        d.owner_id = csv::parse_int(f[1], line, "owner_id");
        auto type = parse_device_type(f[2]);
        if (!type) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: unknown device_type '{}'", line, f[2]));
        d.device_type = *type;
        d.latitude = csv::parse_double(f[3], line, "latitude");
        d.longitude = csv::parse_double(f[4], line, "longitude");
        auto mob = parse_mobility(f[5]);
        if (!mob) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: unknown mobility '{}'", line, f[5]));
        d.mobility = *mob;
        auto mode = parse_access_mode(f[6]);
        if (!mode) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: unknown mode '{}'", line, f[6]));
        d.mode = *mode;
        d.brand = std::string(f[7]);
        d.cpu_manufacturer = std::string(f[8]);
        d.cores = static_cast<int>(csv::parse_int(f[9], line, "cores"));
        d.cpi = csv::parse_double(f[10], line, "cpi");
        d.clock_rate_ghz = csv::parse_double(f[11], line, "clock_rate_ghz");
        d.ram_gb = csv::parse_double(f[12], line, "ram_gb");
        d.availability_pct = csv::parse_double(f[13], line, "availability_pct");
        validate_device(d);
        if (!seen.insert(d.id).second) throw Error(ErrorCode::DuplicateId, fmt::format("line {}: id {}", line, d.id));
        out.push_back(std::move(d));
    });
    return out;
}

void save_devices(const std::filesystem::path& path, const std::vector<Device>& devices) {
    auto out = csv::open_for_write(path);
    out << kDeviceHeader << '\n';
    for (const auto& d : devices) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", d.id, d.owner_id, to_string(d.device_type),
                           d.latitude, d.longitude, to_string(d.mobility), to_string(d.mode), d.brand,
                           d.cpu_manufacturer, d.cores, d.cpi, d.clock_rate_ghz, d.ram_gb, d.availability_pct);
    }
}

std::vector<MeetingEvent> load_meetings(const std::filesystem::path& path) {
    std::vector<MeetingEvent> out;
    csv::read(path, kMeetingHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
        if (f.size() != 4) {
            throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 4 fields, got {}", line, f.size()));
        }
        MeetingEvent m;
        m.device_a = csv::parse_int(f[0], line, "device_a");
        m.device_b = csv::parse_int(f[1], line, "device_b");
        m.start_time_s = csv::parse_double(f[2], line, "start_time_s");
        m.duration_min = csv::parse_double(f[3], line, "duration_min");
        if (m.device_a == m.device_b) {
            throw Error(ErrorCode::MalformedRow, fmt::format("line {}: meeting of device {} with itself", line, m.device_a));
        }
        if (!(m.duration_min > 0.0)) throw Error(ErrorCode::OutOfRange, fmt::format("line {}: duration_min", line));
        if (!(m.start_time_s >= 0.0)) throw Error(ErrorCode::OutOfRange, fmt::format("line {}: start_time_s", line));
        out.push_back(m);
    });
    return out;
}

void save_meetings(const std::filesystem::path& path, const std::vector<MeetingEvent>& meetings) {
    auto out = csv::open_for_write(path);
    out << kMeetingHeader << '\n';
    for (const auto& m : meetings) {
        out << fmt::format("{},{},{},{}\n", m.device_a, m.device_b, m.start_time_s, m.duration_min);
    }
}

OwnerNetwork load_owner_network(const std::filesystem::path& path, std::int64_t n_owners) {
    OwnerNetwork net;
    net.n_owners = n_owners;
    csv::read(path, kOwnerHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
        if (f.size() != 2) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 2 fields", line));
        auto a = csv::parse_int(f[0], line, "owner_a");
        auto b = csv::parse_int(f[1], line, "owner_b");
        if (a == b) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: owner self-loop", line));
        if (a < 0 || b < 0 || a >= n_owners || b >= n_owners) {
            throw Error(ErrorCode::UnknownOwner, fmt::format("line {}: owner pair {}-{}", line, a, b));
        }
        net.edges.emplace_back(std::min(a, b), std::max(a, b));
    });
    std::sort(net.edges.begin(), net.edges.end());
    net.edges.erase(std::unique(net.edges.begin(), net.edges.end()), net.edges.end());
    return net;
}

void save_owner_network(const std::filesystem::path& path, const OwnerNetwork& net) {
    auto out = csv::open_for_write(path);
    out << kOwnerHeader << '\n';
    for (auto [a, b] : net.edges) out << a << ',' << b << '\n';
}

// ---------------------------------------------------------------------------
// Generators

OwnerNetwork generate_owner_network(std::int64_t n_owners, int k, double beta, std::uint64_t seed) {
    if (k < 2 || k % 2 != 0 || n_owners <= k || !(beta >= 0.0 && beta <= 1.0)) {
        throw Error(ErrorCode::InvalidParams,
                    fmt::format("watts-strogatz needs n > k >= 2, k even, beta in [0,1] (n={}, k={}, beta={})",
                                n_owners, k, beta));
    }
    const auto n = static_cast<std::size_t>(n_owners);
    std::vector<std::set<std::size_t>> adj(n);
    for (std::size_t u = 0; u < n; ++u) {
        for (int j = 1; j <= k / 2; ++j) {
            auto v = (u + static_cast<std::size_t>(j)) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int j = 1; j <= k / 2; ++j) {
        for (std::size_t u = 0; u < n; ++u) {
            const auto v = (u + static_cast<std::size_t>(j)) % n;
            if (coin(rng) >= beta) continue;
            if (!adj[u].count(v)) continue;  // already rewired away
            if (adj[u].size() >= n - 1) continue;
            std::size_t w;
            do {
                w = uniform_index(rng, n);
            } while (w == u || adj[u].count(w));
            adj[u].erase(v);
            adj[v].erase(u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    OwnerNetwork net;
    net.n_owners = n_owners;
    for (std::size_t u = 0; u < n; ++u) {
        for (auto v : adj[u]) {
            if (u < v) net.edges.emplace_back(static_cast<OwnerId>(u), static_cast<OwnerId>(v));
        }
    }
    return net;
}

namespace {

struct TypeProfile {
    double weight;
    Mobility mobility;
    double public_prob;
    double r_lo, r_hi;
    std::vector<double> ram_choices;
    double avail_lo, avail_hi;  // avail_hi == 0 marks a pure requester
    std::vector<int> cores;
    std::vector<std::string> brands;
    std::vector<std::string> manufacturers;
};

const std::vector<TypeProfile>& type_profiles() {
    static const std::vector<TypeProfile> profiles = {
        // smartphone
        {20, Mobility::Mobile, 0.0, 1.0, 2.8, {2, 3, 4, 6, 8}, 20, 90, {4, 8},
         {"Samsung", "Apple", "Xiaomi", "Huawei", "Motorola"}, {"Qualcomm", "Apple", "MediaTek", "Samsung"}},
        // pc
        {12, Mobility::Static, 0.1, 2.0, 4.0, {8, 16, 32}, 20, 100, {2, 4, 6, 8},
         {"Dell", "HP", "Lenovo", "Apple", "Asus"}, {"Intel", "AMD", "Apple"}},
        // tablet
        {10, Mobility::Mobile, 0.0, 1.0, 2.8, {2, 4, 6, 8}, 20, 90, {4, 8},
         {"Apple", "Samsung", "Lenovo", "Amazon"}, {"Apple", "Qualcomm", "MediaTek"}},
        // smartwatch
        {6, Mobility::Mobile, 0.0, 0.8, 1.2, {0.5, 1}, 10, 50, {1, 2},
         {"Apple", "Samsung", "Garmin", "Fitbit"}, {"Apple", "Qualcomm", "Samsung"}},
        // car
        {8, Mobility::Mobile, 0.0, 1.0, 1.6, {2, 4}, 30, 100, {2, 4},
         {"Renault", "Seat", "Volkswagen", "Toyota", "Peugeot"}, {"Nvidia", "Intel", "Qualcomm"}},
        // transportation
        {4, Mobility::Mobile, 1.0, 1.0, 1.6, {2, 4}, 30, 100, {2, 4},
         {"Tussam", "Alsa", "Irizar"}, {"Nvidia", "Intel"}},
        // home_sensor
        {10, Mobility::Static, 0.0, 0.016, 0.2, {0.064, 0.128, 0.256}, 0, 0, {1},
         {"Libelium", "Bosch", "Honeywell", "Netatmo"}, {"ARM", "Atmel"}},
        // printer
        {4, Mobility::Static, 0.3, 0.2, 0.8, {0.25, 0.5}, 0, 0, {1},
         {"HP", "Canon", "Epson", "Brother"}, {"ARM", "Marvell"}},
        // smart_fitness
        {4, Mobility::Mobile, 0.0, 0.8, 1.2, {0.5, 1}, 10, 50, {1, 2},
         {"Garmin", "Fitbit", "Polar", "Xiaomi"}, {"ARM", "Qualcomm"}},
        // indicator
        {5, Mobility::Static, 1.0, 0.016, 0.2, {0.064, 0.128}, 0, 0, {1},
         {"Libelium", "Siemens"}, {"ARM", "Atmel"}},
        // alarm
        {5, Mobility::Static, 0.0, 0.016, 0.2, {0.064, 0.128}, 0, 0, {1},
         {"Bosch", "Honeywell", "Siemens"}, {"ARM", "Atmel"}},
        // street_light
        {6, Mobility::Static, 1.0, 0.016, 0.2, {0.064, 0.128}, 0, 0, {1},
         {"Philips", "Schreder", "Libelium"}, {"ARM", "Atmel"}},
        // parking
        {6, Mobility::Static, 1.0, 0.016, 0.2, {0.064, 0.128}, 0, 0, {1},
         {"Libelium", "Urbiotica", "Siemens"}, {"ARM", "Atmel"}},
    };
    return profiles;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[uniform_index(rng, v.size())];
}

double round_to(double v, double step) { return std::round(v / step) * step; }

}  // namespace

double availability_lower_bound(DeviceType t) { return type_profiles()[static_cast<std::size_t>(t)].avail_lo; }
double availability_upper_bound(DeviceType t) { return type_profiles()[static_cast<std::size_t>(t)].avail_hi; }

std::vector<Device> generate_synthetic_devices(std::int64_t n, std::int64_t n_owners, const GeoBox& box,
                                               std::uint64_t seed) {
    if (n <= 0 || n_owners <= 0) {
        throw Error(ErrorCode::InvalidParams, fmt::format("need n > 0 and n_owners > 0 (n={}, n_owners={})", n, n_owners));
    }
    if (!(box.lat_min < box.lat_max && box.lon_min < box.lon_max)) {
        throw Error(ErrorCode::InvalidParams, "empty geo box");
    }
    constexpr int kMaxPerOwner = 8;
    Rng owner_rng(derive_seed(seed, "owners"));

    // Geometric(0.5) devices per owner, capped, then nudged to hit exactly n.
    std::vector<int> counts(static_cast<std::size_t>(n_owners));
    std::geometric_distribution<int> geom(0.5);
    std::int64_t total = 0;
    for (auto& c : counts) {
        c = std::min(kMaxPerOwner, 1 + geom(owner_rng));
        total += c;
    }
    while (total < n) {
        auto& c = counts[uniform_index(owner_rng, counts.size())];
        if (c < kMaxPerOwner || total >= static_cast<std::int64_t>(counts.size()) * kMaxPerOwner) {
            ++c;
            ++total;
        }
    }
    while (total > n) {
        auto& c = counts[uniform_index(owner_rng, counts.size())];
        if (c > 0) {
            --c;
            --total;
        }
    }
    std::vector<OwnerId> owner_of;
    owner_of.reserve(static_cast<std::size_t>(n));
    for (std::size_t o = 0; o < counts.size(); ++o) {
        for (int i = 0; i < counts[o]; ++i) owner_of.push_back(static_cast<OwnerId>(o));
    }
    std::shuffle(owner_of.begin(), owner_of.end(), owner_rng);

    const auto& profiles = type_profiles();
    std::vector<double> weights;
    for (const auto& p : profiles) weights.push_back(p.weight);
    std::discrete_distribution<std::size_t> type_dist(weights.begin(), weights.end());

    Rng rng(derive_seed(seed, "devices"));
    std::vector<Device> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto ti = type_dist(rng);
        const auto& prof = profiles[ti];
        Device d;
        d.id = i + 1;
        d.owner_id = owner_of[static_cast<std::size_t>(i)];
        d.device_type = kAllTypes[ti];
        d.latitude = uniform(rng, box.lat_min, box.lat_max);
        d.longitude = uniform(rng, box.lon_min, box.lon_max);
        d.mobility = prof.mobility;
        d.mode = uniform(rng, 0.0, 1.0) < prof.public_prob ? AccessMode::Public : AccessMode::Private;
        d.brand = pick(rng, prof.brands);
        d.cpu_manufacturer = pick(rng, prof.manufacturers);
        d.cores = pick(rng, prof.cores);
        d.cpi = round_to(uniform(rng, 0.7, 1.5), 0.01);
        d.clock_rate_ghz = std::max(0.001, round_to(uniform(rng, prof.r_lo, prof.r_hi), 0.001));
        d.ram_gb = pick(rng, prof.ram_choices);
        d.availability_pct = prof.avail_hi > 0.0 ? round_to(uniform(rng, prof.avail_lo, prof.avail_hi), 0.1) : 0.0;
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Meetings

namespace {

struct Grid {
    double cell_m;
    double lat0;
    std::unordered_map<std::int64_t, std::vector<std::size_t>> cells;

    static std::int64_t key(std::int64_t cx, std::int64_t cy) { return (cx << 32) ^ (cy & 0xffffffffLL); }

    std::pair<std::int64_t, std::int64_t> cell_of(GeoPoint p) const {
        const double m_per_deg = kEarthRadiusM * std::numbers::pi / 180.0;
        const double y = p.lat * m_per_deg;
        const double x = p.lon * m_per_deg * std::cos(lat0 * std::numbers::pi / 180.0);
        return {static_cast<std::int64_t>(std::floor(x / cell_m)), static_cast<std::int64_t>(std::floor(y / cell_m))};
    }

    void insert(std::size_t idx, GeoPoint p) {
        auto [cx, cy] = cell_of(p);
        cells[key(cx, cy)].push_back(idx);
    }

    /// Calls f(j) for every indexed point j within `radius` of p (strictly closer).
    template <typename F>
    void near(GeoPoint p, const std::vector<GeoPoint>& pos, double radius, F&& f) const {
        auto [cx, cy] = cell_of(p);
        // the equirectangular cell size drifts from haversine by far less than one cell at city scale
        for (std::int64_t dx = -2; dx <= 2; ++dx) {
            for (std::int64_t dy = -2; dy <= 2; ++dy) {
                auto it = cells.find(key(cx + dx, cy + dy));
                if (it == cells.end()) continue;
                for (auto j : it->second) {
                    if (geo_distance(p, pos[j]) < radius) f(j);
                }
            }
        }
    }
};

struct Walker {
    GeoPoint target;
    double speed_ms;
};

}  // namespace

std::vector<MeetingEvent> generate_meetings(const std::vector<Device>& devices, int days, std::uint64_t seed,
                                            const MeetingParams& params, const GeoBox& box) {
    if (days < 1) throw Error(ErrorCode::InvalidParams, "days must be >= 1");
    if (!(params.radius_m > 0.0) || !(params.step_s > 0.0)) throw Error(ErrorCode::InvalidParams, "meeting params");
    std::vector<MeetingEvent> out;
    if (devices.size() < 2) return out;

    // deterministic index order by id
    std::vector<std::size_t> order(devices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return devices[a].id < devices[b].id; });

    const double step_min = params.step_s / 60.0;
    const auto steps = static_cast<std::int64_t>(std::floor(days * 86400.0 / params.step_s));
    std::vector<GeoPoint> pos(devices.size());
    std::vector<std::size_t> mobile;
    std::vector<std::size_t> fixed;
    double lat_sum = 0.0;
    for (auto i : order) {
        pos[i] = devices[i].location();
        lat_sum += pos[i].lat;
        (devices[i].mobility == Mobility::Mobile ? mobile : fixed).push_back(i);
    }
    const double lat0 = lat_sum / static_cast<double>(devices.size());

    auto pair_of = [&](std::size_t i, std::size_t j) {
        DeviceId a = devices[i].id, b = devices[j].id;
        return std::pair{std::min(a, b), std::max(a, b)};
    };

    // Static pairs meet at every sample.
    Grid static_grid{params.radius_m, lat0, {}};
    for (auto i : fixed) static_grid.insert(i, pos[i]);
    std::vector<std::pair<DeviceId, DeviceId>> static_pairs;
    for (auto i : fixed) {
        static_grid.near(pos[i], pos, params.radius_m, [&](std::size_t j) {
            if (devices[i].id < devices[j].id) static_pairs.push_back(pair_of(i, j));
        });
    }
    std::sort(static_pairs.begin(), static_pairs.end());

    Rng rng(seed);
    auto new_target = [&]() {
        return GeoPoint{uniform(rng, box.lat_min, box.lat_max), uniform(rng, box.lon_min, box.lon_max)};
    };
    auto new_speed = [&]() { return uniform(rng, params.min_speed_kmh, params.max_speed_kmh) / 3.6; };
    std::vector<Walker> walkers(devices.size());
    for (auto i : mobile) {
        walkers[i].target = new_target();
        walkers[i].speed_ms = new_speed();
    }

    // open contact intervals of pairs involving a mobile device: pair -> (first step, last step)
    std::map<std::pair<DeviceId, DeviceId>, std::pair<std::int64_t, std::int64_t>> open;
    auto flush = [&](const std::pair<DeviceId, DeviceId>& p, std::pair<std::int64_t, std::int64_t> span) {
        const auto len = span.second - span.first + 1;
        out.push_back({p.first, p.second, static_cast<double>(span.first) * params.step_s,
                       std::max(30.0, static_cast<double>(len) * step_min)});
    };

    for (std::int64_t t = 0; t < steps; ++t) {
        if (t > 0) {
            for (auto i : mobile) {
                double budget = walkers[i].speed_ms * params.step_s;
                while (budget > 0.0) {
                    const double d = geo_distance(pos[i], walkers[i].target);
                    if (d > budget) {
                        pos[i] = step_toward(pos[i], walkers[i].target, budget);
                        budget = 0.0;
                    } else {
                        pos[i] = walkers[i].target;
                        budget -= d;
                        walkers[i].target = new_target();
                        walkers[i].speed_ms = new_speed();
                    }
                }
            }
        }
        for (const auto& p : static_pairs) {
            out.push_back({p.first, p.second, static_cast<double>(t) * params.step_s, step_min});
        }
        Grid grid{params.radius_m, lat0, {}};
        for (auto i : order) grid.insert(i, pos[i]);
        for (auto i : mobile) {
            grid.near(pos[i], pos, params.radius_m, [&](std::size_t j) {
                if (j == i) return;
                // mobile-mobile pairs are seen from both sides; keep one
                if (devices[j].mobility == Mobility::Mobile && devices[j].id < devices[i].id) return;
                auto key = pair_of(i, j);
                auto it = open.find(key);
                if (it != open.end() && it->second.second == t - 1) {
                    it->second.second = t;
                } else {
                    if (it != open.end()) {
                        flush(key, it->second);
                        it->second = {t, t};
                    } else {
                        open.emplace(key, std::pair{t, t});
                    }
                }
            });
        }
        for (auto it = open.begin(); it != open.end();) {
            if (it->second.second < t) {
                flush(it->first, it->second);
                it = open.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (const auto& [key, span] : open) flush(key, span);

    std::sort(out.begin(), out.end(), [](const MeetingEvent& x, const MeetingEvent& y) {
        return std::tie(x.start_time_s, x.device_a, x.device_b) < std::tie(y.start_time_s, y.device_a, y.device_b);
    });
    return out;
}

}  // namespace siot
