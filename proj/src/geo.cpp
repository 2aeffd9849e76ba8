#include "siot/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace siot {

namespace {
constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
}  // namespace

double geo_distance(GeoPoint a, GeoPoint b) {
    if (a == b) return 0.0;
    const double phi1 = deg2rad(a.lat);
    const double phi2 = deg2rad(b.lat);
    const double dphi = phi2 - phi1;
    const double dlambda = deg2rad(b.lon - a.lon);
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

GeoPoint step_toward(GeoPoint from, GeoPoint to, double step_m) {
    const double m_per_deg = kEarthRadiusM * std::numbers::pi / 180.0;
    const double dy = (to.lat - from.lat) * m_per_deg;
    const double dx = (to.lon - from.lon) * m_per_deg * std::cos(deg2rad(from.lat));
    const double dist = std::hypot(dx, dy);
    if (dist <= step_m || dist == 0.0) return to;
    const double f = step_m / dist;
    return {from.lat + (to.lat - from.lat) * f, from.lon + (to.lon - from.lon) * f};
}

}  // namespace siot
