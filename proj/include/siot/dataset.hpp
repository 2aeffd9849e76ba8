#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "siot/geo.hpp"

namespace siot {

using DeviceId = std::int64_t;
using OwnerId = std::int64_t;

enum class DeviceType {
    Smartphone,
    Pc,
    Tablet,
    Smartwatch,
    Car,
    Transportation,
    HomeSensor,
    Printer,
    SmartFitness,
    Indicator,
    Alarm,
    StreetLight,
    Parking,
};
inline constexpr std::size_t kDeviceTypeCount = 13;

enum class Mobility { Static, Mobile };
enum class AccessMode { Private, Public };

std::string_view to_string(DeviceType t);
std::string_view to_string(Mobility m);
std::string_view to_string(AccessMode m);
std::optional<DeviceType> parse_device_type(std::string_view s);
std::optional<Mobility> parse_mobility(std::string_view s);
std::optional<AccessMode> parse_access_mode(std::string_view s);
const std::array<DeviceType, kDeviceTypeCount>& all_device_types();

struct Device {
    DeviceId id = 0;
    OwnerId owner_id = 0;
    DeviceType device_type = DeviceType::Smartphone;
    double latitude = 0.0;
    double longitude = 0.0;
    Mobility mobility = Mobility::Static;
    AccessMode mode = AccessMode::Private;
    std::string brand;
    std::string cpu_manufacturer;
    int cores = 1;
    double cpi = 1.0;
    double clock_rate_ghz = 1.0;
    double ram_gb = 1.0;
    double availability_pct = 0.0;

    GeoPoint location() const { return {latitude, longitude}; }
    bool can_compute() const { return availability_pct > 0.0; }

    friend bool operator==(const Device&, const Device&) = default;
};

struct TaskRequest {
    DeviceId requester_id = 0;
    double instruction_count_mi = 1.0;
    double message_size_mb = 1.0;
};

struct OwnerNetwork {
    std::int64_t n_owners = 0;
    /// Unordered pairs stored as (min, max), sorted.
    std::vector<std::pair<OwnerId, OwnerId>> edges;

    std::vector<std::vector<OwnerId>> adjacency() const;
};

struct MeetingEvent {
    DeviceId device_a = 0;
    DeviceId device_b = 0;
    double start_time_s = 0.0;
    double duration_min = 0.0;

    friend bool operator==(const MeetingEvent&, const MeetingEvent&) = default;
};

struct DatasetBundle {
    std::vector<Device> devices;
    OwnerNetwork owner_network;
    std::vector<MeetingEvent> meetings;

    /// Throws UnknownOwner / UnknownDevice when cross references are broken.
    void validate() const;
    const Device* find(DeviceId id) const;
};

struct GeoBox {
    double lat_min = 43.44;
    double lat_max = 43.48;
    double lon_min = -3.84;
    double lon_max = -3.78;
};

/// Per-type availability range used by the synthetic generator; [0, 0] for pure requesters.
double availability_lower_bound(DeviceType t);
double availability_upper_bound(DeviceType t);

/// Throws OutOfRange naming the first violated field.
void validate_device(const Device& d);

std::vector<Device> load_devices(const std::filesystem::path& path);
void save_devices(const std::filesystem::path& path, const std::vector<Device>& devices);
std::vector<MeetingEvent> load_meetings(const std::filesystem::path& path);
void save_meetings(const std::filesystem::path& path, const std::vector<MeetingEvent>& meetings);
OwnerNetwork load_owner_network(const std::filesystem::path& path, std::int64_t n_owners);
void save_owner_network(const std::filesystem::path& path, const OwnerNetwork& net);

/// Ring lattice of degree k over n owners, each lattice edge rewired with probability beta.
OwnerNetwork generate_owner_network(std::int64_t n_owners, int k, double beta, std::uint64_t seed);

std::vector<Device> generate_synthetic_devices(std::int64_t n, std::int64_t n_owners, const GeoBox& box,
                                               std::uint64_t seed);

struct MeetingParams {
    double radius_m = 100.0;
    double step_s = 3600.0;
    double min_speed_kmh = 1.0;
    double max_speed_kmh = 6.0;
};

std::vector<MeetingEvent> generate_meetings(const std::vector<Device>& devices, int days, std::uint64_t seed,
                                            const MeetingParams& params = {}, const GeoBox& box = {});

}  // namespace siot
