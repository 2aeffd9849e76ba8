#pragma once

namespace siot {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Haversine great-circle distance in meters.
double geo_distance(GeoPoint a, GeoPoint b);

/// Moves `from` toward `to` by at most `step_m` meters (equirectangular; fine at city scale).
GeoPoint step_toward(GeoPoint from, GeoPoint to, double step_m);

}  // namespace siot
