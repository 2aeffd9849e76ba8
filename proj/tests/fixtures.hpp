#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "siot/dataset.hpp"
#include "siot/rng.hpp"

namespace fixtures {

inline siot::Device device(siot::DeviceId id, siot::OwnerId owner = 0, double lat = 43.46, double lon = -3.81,
                           double avail = 50.0, siot::DeviceType type = siot::DeviceType::Pc) {
    siot::Device d;
    d.id = id;
    d.owner_id = owner;
    d.device_type = type;
    d.latitude = lat;
    d.longitude = lon;
    d.brand = "acme";
    d.cpu_manufacturer = "intel";
    d.cores = 4;
    d.cpi = 1.0;
    d.clock_rate_ghz = 2.0;
    d.ram_gb = 8.0;
    d.availability_pct = avail;
    return d;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("siot_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace fixtures
