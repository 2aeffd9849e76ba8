#include "siot/oracle.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "csv.hpp"
#include "siot/error.hpp"

namespace siot {

std::string_view to_string(CommTech t) { return t == CommTech::D2d ? "d2d" : "cellular"; }
std::string_view to_string(ExperienceMode m) { return m == ExperienceMode::Static ? "static" : "dynamic"; }

std::optional<ExperienceMode> parse_experience_mode(std::string_view s) {
    if (s == "static") return ExperienceMode::Static;
    if (s == "dynamic") return ExperienceMode::Dynamic;
    return std::nullopt;
}

CommTech comm_technology(double distance_m, double d2d_radius_m) {
    return distance_m < d2d_radius_m ? CommTech::D2d : CommTech::Cellular;
}

ResponseTime response_time(const TaskRequest& task, CommTech tech, double cpi, double clock_rate_ghz,
                           double availability_pct, const OracleParams& params) {
    if (!(availability_pct > 0.0)) return std::nullopt;
    const bool d2d = tech == CommTech::D2d;
    const double latency = d2d ? params.d2d_latency_s : params.cellular_latency_s;
    const double bandwidth = d2d ? params.d2d_bandwidth_mbps : params.cellular_bandwidth_mbps;
    const double transfer = 2.0 * latency + 2.0 * task.message_size_mb / bandwidth;
    const double cycles = task.instruction_count_mi * params.instruction_scale * cpi;
    const double processing = cycles / (clock_rate_ghz * 1e9 * (availability_pct / 100.0));
    return transfer + processing;
}

ResponseTime response_time(const Device& requester, const TaskRequest& task, const Device& edge,
                           const OracleParams& params) {
    if (task.requester_id != requester.id) {
        throw Error(ErrorCode::MismatchedRequest,
                    fmt::format("task names requester {} but device {} was given", task.requester_id, requester.id));
    }
    const auto tech = comm_technology(geo_distance(requester.location(), edge.location()), params.d2d_radius_m);
    return response_time(task, tech, edge.cpi, edge.clock_rate_ghz, edge.availability_pct, params);
}

SharingExperience make_experience(const Device& requester, const TaskRequest& task, const Device& edge,
                                  const OracleParams& params, std::optional<double> availability_pct) {
    SharingExperience e;
    e.requester_id = requester.id;
    e.requester_type = requester.device_type;
    e.requester_lat = requester.latitude;
    e.requester_lon = requester.longitude;
    e.instruction_count_mi = task.instruction_count_mi;
    e.message_size_mb = task.message_size_mb;
    e.edge_id = edge.id;
    e.edge_type = edge.device_type;
    e.edge_mode = edge.mode;
    e.edge_mobility = edge.mobility;
    e.edge_lat = edge.latitude;
    e.edge_lon = edge.longitude;
    e.edge_cpi = edge.cpi;
    e.edge_clock_rate_ghz = edge.clock_rate_ghz;
    e.edge_ram_gb = edge.ram_gb;
    e.edge_cores = edge.cores;
    e.edge_availability_pct = availability_pct.value_or(edge.availability_pct);
    e.tech = comm_technology(geo_distance(requester.location(), edge.location()), params.d2d_radius_m);
    e.observed_rt = response_time(task, e.tech, e.edge_cpi, e.edge_clock_rate_ghz, e.edge_availability_pct, params);
    return e;
}

TaskRequest sample_task(DeviceId requester, const TaskDistribution& tasks, Rng& rng) {
    TaskRequest t;
    t.requester_id = requester;
    t.instruction_count_mi = uniform(rng, tasks.ic_min_mi, tasks.ic_max_mi);
    t.message_size_mb = uniform(rng, tasks.msg_min_mb, tasks.msg_max_mb);
    return t;
}

namespace {

double resample_availability(const Device& d, Rng& rng) {
    if (!d.can_compute()) return 0.0;
    double lo = availability_lower_bound(d.device_type);
    double hi = availability_upper_bound(d.device_type);
    if (!(hi > 0.0)) {
        // computing device of a type the generator treats as a pure requester (e.g. ingested data)
        lo = std::max(1.0, d.availability_pct * 0.5);
        hi = std::min(100.0, d.availability_pct * 1.5);
    }
    return std::round(uniform(rng, lo, hi) * 10.0) / 10.0;
}

}  // namespace

std::vector<SharingExperience> generate_experiences(const std::vector<Device>& devices, std::int64_t n,
                                                    ExperienceMode mode, std::uint64_t seed,
                                                    const OracleParams& params, const TaskDistribution& tasks) {
    if (n < 1) throw Error(ErrorCode::InvalidParams, "experience count must be >= 1");
    const bool any_compute = std::any_of(devices.begin(), devices.end(), [](const Device& d) { return d.can_compute(); });
    if (devices.size() < 2 || !any_compute) {
        throw Error(ErrorCode::InsufficientDevices, "need two devices, one of them with availability > 0");
    }
    if (!(tasks.ic_min_mi > 0.0 && tasks.ic_min_mi <= tasks.ic_max_mi && tasks.msg_min_mb > 0.0 &&
          tasks.msg_min_mb <= tasks.msg_max_mb)) {
        throw Error(ErrorCode::InvalidParams, "task distribution bounds");
    }

    // Static mode: one message size per requester, availability as in the device table.
    std::vector<double> static_msg(devices.size());
    for (std::size_t i = 0; i < devices.size(); ++i) {
        Rng r(derive_seed(derive_seed(seed, "static-message"), static_cast<std::uint64_t>(devices[i].id)));
        static_msg[i] = uniform(r, tasks.msg_min_mb, tasks.msg_max_mb);
    }

    std::vector<SharingExperience> out;
    out.reserve(static_cast<std::size_t>(n));
    const auto base = derive_seed(seed, "experience");
    for (std::int64_t k = 0; k < n; ++k) {
        Rng rng(derive_seed(base, static_cast<std::uint64_t>(k)));
        const auto ri = uniform_index(rng, devices.size());
        auto ei = uniform_index(rng, devices.size() - 1);
        if (ei >= ri) ++ei;
        const Device& req = devices[ri];
        const Device& edge = devices[ei];
        TaskRequest task = sample_task(req.id, tasks, rng);
        std::optional<double> avail;
        if (mode == ExperienceMode::Static) {
            task.message_size_mb = static_msg[ri];
        } else {
            avail = resample_availability(edge, rng);
        }
        out.push_back(make_experience(req, task, edge, params, avail));
    }
    return out;
}

namespace {
constexpr char kExperienceHeader[] =
    "requester_id,requester_type,requester_lat,requester_lon,instruction_count_mi,message_size_mb,edge_id,edge_type,"
    "edge_mode,edge_mobility,edge_lat,edge_lon,edge_cpi,edge_clock_rate_ghz,edge_ram_gb,edge_cores,"
    "edge_availability_pct,tech,available,observed_rt_s";
}

void save_experiences(const std::filesystem::path& path, const std::vector<SharingExperience>& rows) {
    auto out = csv::open_for_write(path);
    out << kExperienceHeader << '\n';
    for (const auto& e : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},", e.requester_id,
                           to_string(e.requester_type), e.requester_lat, e.requester_lon, e.instruction_count_mi,
                           e.message_size_mb, e.edge_id, to_string(e.edge_type), to_string(e.edge_mode),
                           to_string(e.edge_mobility), e.edge_lat, e.edge_lon, e.edge_cpi, e.edge_clock_rate_ghz,
                           e.edge_ram_gb, e.edge_cores, e.edge_availability_pct, to_string(e.tech),
                           e.available() ? 1 : 0);
        if (e.observed_rt) out << fmt::format("{}", *e.observed_rt);
        out << '\n';
    }
}

std::vector<SharingExperience> load_experiences(const std::filesystem::path& path) {
    std::vector<SharingExperience> rows;
    csv::read(path, kExperienceHeader, [&](const std::vector<std::string_view>& f, std::size_t line) {
        if (f.size() != 20) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected 20 fields", line));
        auto bad = [&](std::string_view what) {
            return Error(ErrorCode::MalformedRow, fmt::format("line {}: bad {}", line, what));
        };
        SharingExperience e;
        e.requester_id = csv::parse_int(f[0], line, "requester_id");
        e.requester_type = parse_device_type(f[1]).value_or(DeviceType::Smartphone);
        if (!parse_device_type(f[1])) throw bad("requester_type");
        e.requester_lat = csv::parse_double(f[2], line, "requester_lat");
        e.requester_lon = csv::parse_double(f[3], line, "requester_lon");
        e.instruction_count_mi = csv::parse_double(f[4], line, "instruction_count_mi");
        e.message_size_mb = csv::parse_double(f[5], line, "message_size_mb");
        e.edge_id = csv::parse_int(f[6], line, "edge_id");
        auto et = parse_device_type(f[7]);
        auto em = parse_access_mode(f[8]);
        auto eb = parse_mobility(f[9]);
        if (!et || !em || !eb) throw bad("edge categorical");
        e.edge_type = *et;
        e.edge_mode = *em;
        e.edge_mobility = *eb;
        e.edge_lat = csv::parse_double(f[10], line, "edge_lat");
        e.edge_lon = csv::parse_double(f[11], line, "edge_lon");
        e.edge_cpi = csv::parse_double(f[12], line, "edge_cpi");
        e.edge_clock_rate_ghz = csv::parse_double(f[13], line, "edge_clock_rate_ghz");
        e.edge_ram_gb = csv::parse_double(f[14], line, "edge_ram_gb");
        e.edge_cores = static_cast<int>(csv::parse_int(f[15], line, "edge_cores"));
        e.edge_availability_pct = csv::parse_double(f[16], line, "edge_availability_pct");
        if (f[17] == "d2d") {
            e.tech = CommTech::D2d;
        } else if (f[17] == "cellular") {
            e.tech = CommTech::Cellular;
        } else {
            throw bad("tech");
        }
        const bool available = f[18] == "1";
        if (available) e.observed_rt = csv::parse_double(f[19], line, "observed_rt_s");
        rows.push_back(e);
    });
    return rows;
}

}  // namespace siot
