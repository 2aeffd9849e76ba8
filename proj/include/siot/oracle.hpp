#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "siot/dataset.hpp"
#include "siot/rng.hpp"

namespace siot {

enum class CommTech { D2d, Cellular };
std::string_view to_string(CommTech t);

struct OracleParams {
    double d2d_latency_s = 0.005;
    double cellular_latency_s = 0.025;
    double d2d_bandwidth_mbps = 50.0;
    double cellular_bandwidth_mbps = 10.0;
    double d2d_radius_m = 100.0;
    /// Instructions per unit of instruction_count_mi (1e6 = millions of instructions).
    double instruction_scale = 1e6;
};

/// Finite positive seconds, or nullopt for an edge that offers no compute.
using ResponseTime = std::optional<double>;

CommTech comm_technology(double distance_m, double d2d_radius_m);

ResponseTime response_time(const Device& requester, const TaskRequest& task, const Device& edge,
                           const OracleParams& params = {});

/// Same model with the availability fraction given explicitly (the experience snapshot).
ResponseTime response_time(const TaskRequest& task, CommTech tech, double cpi, double clock_rate_ghz,
                           double availability_pct, const OracleParams& params = {});

enum class ExperienceMode { Static, Dynamic };
std::string_view to_string(ExperienceMode m);
std::optional<ExperienceMode> parse_experience_mode(std::string_view s);

struct TaskDistribution {
    double ic_min_mi = 20.0;
    double ic_max_mi = 200.0;
    double msg_min_mb = 0.5;
    double msg_max_mb = 5.0;
};

/// One simulated offload: a self-contained snapshot of both devices plus the observed outcome.
struct SharingExperience {
    DeviceId requester_id = 0;
    DeviceType requester_type = DeviceType::Smartphone;
    double requester_lat = 0.0;
    double requester_lon = 0.0;
    double instruction_count_mi = 0.0;
    double message_size_mb = 0.0;

    DeviceId edge_id = 0;
    DeviceType edge_type = DeviceType::Smartphone;
    AccessMode edge_mode = AccessMode::Private;
    Mobility edge_mobility = Mobility::Static;
    double edge_lat = 0.0;
    double edge_lon = 0.0;
    double edge_cpi = 1.0;
    double edge_clock_rate_ghz = 1.0;
    double edge_ram_gb = 1.0;
    int edge_cores = 1;
    double edge_availability_pct = 0.0;

    CommTech tech = CommTech::Cellular;
    ResponseTime observed_rt;

    bool available() const { return observed_rt.has_value(); }
    friend bool operator==(const SharingExperience&, const SharingExperience&) = default;
};

/// Builds the snapshot for a (requester, edge, task) triple; availability defaults to the device table value.
SharingExperience make_experience(const Device& requester, const TaskRequest& task, const Device& edge,
                                  const OracleParams& params, std::optional<double> availability_pct = {});

std::vector<SharingExperience> generate_experiences(const std::vector<Device>& devices, std::int64_t n,
                                                    ExperienceMode mode, std::uint64_t seed,
                                                    const OracleParams& params = {},
                                                    const TaskDistribution& tasks = {});

/// Draws a task for `requester` from the task distribution.
TaskRequest sample_task(DeviceId requester, const TaskDistribution& tasks, Rng& rng);

void save_experiences(const std::filesystem::path& path, const std::vector<SharingExperience>& rows);
std::vector<SharingExperience> load_experiences(const std::filesystem::path& path);

}  // namespace siot
