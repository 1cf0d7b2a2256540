#pragma once

#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace geovuln::projection {

inline constexpr double kWebMercatorRadius = 6378137.0;
/// Half the equatorial circumference of the Web Mercator sphere (R·π).
inline constexpr double kWebMercatorHalfWorld = 20037508.342789244;
inline constexpr double kMercatorMaxLatitude = 85.06;

inline double to_radians(double deg) { return deg * std::numbers::pi / 180.0; }
inline double to_degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Constants of one supported CRS. Only the three factory functions build
/// one, so only EPSG 4326/3857/3750 are representable.
class ProjectionSpec {
public:
    static ProjectionSpec geographic() { return ProjectionSpec(kEpsgWgs84); }

    static ProjectionSpec web_mercator()
    {
        ProjectionSpec s(kEpsgWebMercator);
        s.semi_major_ = kWebMercatorRadius;
        s.inverse_flattening_ = 0.0;
        return s;
    }

    /// NAD83(HARN) / UTM zone 4N on GRS80.
    static ProjectionSpec utm_zone_4n()
    {
        ProjectionSpec s(kEpsgUtm4N);
        s.central_meridian_ = -159.0;
        s.scale_ = 0.9996;
        s.false_easting_ = 500000.0;
        s.false_northing_ = 0.0;
        s.semi_major_ = 6378137.0;
        s.inverse_flattening_ = 298.257222101;
        return s;
    }

    static ProjectionSpec from_epsg(int code)
    {
        switch (code) {
        case kEpsgWgs84: return geographic();
        case kEpsgWebMercator: return web_mercator();
        case kEpsgUtm4N: return utm_zone_4n();
        default: throw DomainError("unsupported CRS EPSG:" + std::to_string(code));
        }
    }

    int code() const { return code_; }
    double central_meridian() const { return central_meridian_; }
    double scale() const { return scale_; }
    double false_easting() const { return false_easting_; }
    double false_northing() const { return false_northing_; }
    double semi_major() const { return semi_major_; }
    double flattening() const { return inverse_flattening_ == 0.0 ? 0.0 : 1.0 / inverse_flattening_; }

private:
    explicit ProjectionSpec(int code) : code_(code) {}

    int code_;
    double central_meridian_ = 0.0;
    double scale_ = 1.0;
    double false_easting_ = 0.0;
    double false_northing_ = 0.0;
    double semi_major_ = 0.0;
    double inverse_flattening_ = 0.0;
};

// Spherical Web Mercator.

inline Coordinate mercator_to_geographic(double x, double y)
{
    if (!std::isfinite(x) || !std::isfinite(y) || std::abs(x) > kWebMercatorHalfWorld * (1.0 + 1e-9))
        throw DomainError("coordinate outside projection domain");
    const double lon = to_degrees(x / kWebMercatorRadius);
    const double lat = to_degrees(std::atan(std::sinh(y / kWebMercatorRadius)));
    return {lon, lat};
}

inline Coordinate geographic_to_mercator(double lon, double lat)
{
    if (!std::isfinite(lat) || std::abs(lat) >= kMercatorMaxLatitude)
        throw DomainError("latitude outside Mercator domain");
    if (!std::isfinite(lon) || std::abs(lon) > 180.0) throw DomainError("coordinate outside projection domain");
    const double x = kWebMercatorRadius * to_radians(lon);
    // atanh(sin φ) equals ln tan(π/4 + φ/2) and is exactly 0 at the equator.
    const double y = kWebMercatorRadius * std::atanh(std::sin(to_radians(lat)));
    return {x, y};
}

// Ellipsoidal transverse Mercator, Krüger series through n^4.

namespace detail {

struct KruegerSeries {
    double n;
    double eccentricity;
    double rectifying_radius; // A
    std::array<double, 4> alpha;
    std::array<double, 4> beta;
};

inline KruegerSeries krueger(const ProjectionSpec& spec)
{
    const double f = spec.flattening();
    const double n = f / (2.0 - f);
    const double n2 = n * n;
    const double n3 = n2 * n;
    const double n4 = n3 * n;
    KruegerSeries k{};
    k.n = n;
    k.eccentricity = std::sqrt(f * (2.0 - f));
    k.rectifying_radius = spec.semi_major() / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0);
    k.alpha = {n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0,
               13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0,
               61.0 * n3 / 240.0 - 103.0 * n4 / 140.0,
               49561.0 * n4 / 161280.0};
    k.beta = {n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0,
              n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0,
              17.0 * n3 / 480.0 - 37.0 * n4 / 840.0,
              4397.0 * n4 / 161280.0};
    return k;
}

/// tan of conformal latitude from tan of geodetic latitude.
inline double conformal_tan(double tau, double e)
{
    const double sigma = std::sinh(e * std::atanh(e * tau / std::hypot(1.0, tau)));
    return tau * std::hypot(1.0, sigma) - sigma * std::hypot(1.0, tau);
}

/// Inverts conformal_tan by Newton iteration.
inline double geodetic_tan(double tau_prime, double e)
{
    const double e2 = e * e;
    double tau = tau_prime;
    for (int i = 0; i < 8; ++i) {
        const double tp = conformal_tan(tau, e);
        const double d = (tau_prime - tp) * (1.0 + (1.0 - e2) * tau * tau)
            / ((1.0 - e2) * std::hypot(1.0, tau) * std::hypot(1.0, tp));
        tau += d;
        if (std::abs(d) < 1e-15 * std::max(1.0, std::abs(tau))) break;
    }
    return tau;
}

inline void require_utm(const ProjectionSpec& spec)
{
    if (spec.code() != kEpsgUtm4N) throw DomainError("not a UTM projection spec");
}

} // namespace detail

inline Coordinate geographic_to_utm(double lon, double lat, const ProjectionSpec& spec)
{
    detail::require_utm(spec);
    if (!std::isfinite(lon) || !std::isfinite(lat) || std::abs(lon - spec.central_meridian()) > 6.0
        || std::abs(lat) > 84.0)
        throw DomainError("coordinate outside UTM zone domain");
    const auto k = detail::krueger(spec);
    const double lambda = to_radians(lon - spec.central_meridian());
    const double tau = std::tan(to_radians(lat));
    const double tau_prime = detail::conformal_tan(tau, k.eccentricity);
    const double xi_prime = std::atan2(tau_prime, std::cos(lambda));
    const double eta_prime = std::asinh(std::sin(lambda) / std::hypot(tau_prime, std::cos(lambda)));
    double xi = xi_prime;
    double eta = eta_prime;
    for (int j = 1; j <= 4; ++j) {
        const double a = k.alpha[j - 1];
        xi += a * std::sin(2.0 * j * xi_prime) * std::cosh(2.0 * j * eta_prime);
        eta += a * std::cos(2.0 * j * xi_prime) * std::sinh(2.0 * j * eta_prime);
    }
    const double ka = spec.scale() * k.rectifying_radius;
    return {spec.false_easting() + ka * eta, spec.false_northing() + ka * xi};
}

inline Coordinate utm_to_geographic(double easting, double northing, const ProjectionSpec& spec)
{
    detail::require_utm(spec);
    if (!std::isfinite(easting) || !std::isfinite(northing) || easting < 100000.0 || easting > 900000.0
        || std::abs(northing - spec.false_northing()) > 9400000.0)
        throw DomainError("coordinate outside UTM zone domain");
    const auto k = detail::krueger(spec);
    const double ka = spec.scale() * k.rectifying_radius;
    const double xi = (northing - spec.false_northing()) / ka;
    const double eta = (easting - spec.false_easting()) / ka;
    double xi_prime = xi;
    double eta_prime = eta;
    for (int j = 1; j <= 4; ++j) {
        const double b = k.beta[j - 1];
        xi_prime -= b * std::sin(2.0 * j * xi) * std::cosh(2.0 * j * eta);
        eta_prime -= b * std::cos(2.0 * j * xi) * std::sinh(2.0 * j * eta);
    }
    const double sinh_eta = std::sinh(eta_prime);
    const double cos_xi = std::cos(xi_prime);
    const double tau_prime = std::sin(xi_prime) / std::hypot(sinh_eta, cos_xi);
    const double lambda = std::atan2(sinh_eta, cos_xi);
    const double tau = detail::geodetic_tan(tau_prime, k.eccentricity);
    return {spec.central_meridian() + to_degrees(lambda), to_degrees(std::atan(tau))};
}

/// Converts one coordinate from `from` into EPSG:4326.
inline Coordinate to_geographic(const Coordinate& c, const ProjectionSpec& from)
{
    switch (from.code()) {
    case kEpsgWgs84: return c;
    case kEpsgWebMercator: return mercator_to_geographic(c.x, c.y);
    case kEpsgUtm4N: return utm_to_geographic(c.x, c.y, from);
    }
    throw DomainError("no transform registered");
}

/// Transforms every coordinate into `target`. Only transforms into 4326 are
/// registered; feature order, attributes and geometry kinds are untouched.
inline FeatureCollection reproject_collection(const FeatureCollection& fc, int target)
{
    if (fc.crs == target) return fc;
    if (target != kEpsgWgs84) throw DomainError("no transform registered");
    const ProjectionSpec from = [&] {
        try {
            return ProjectionSpec::from_epsg(fc.crs);
        } catch (const DomainError&) {
            throw DomainError("no transform registered");
        }
    }();
    FeatureCollection out;
    out.crs = target;
    out.features.reserve(fc.features.size());
    for (const auto& f : fc.features) {
        out.features.push_back(
            {map_coordinates(f.geometry, [&](const Coordinate& c) { return to_geographic(c, from); }), f.attributes,
             f.id});
    }
    return out;
}

} // namespace geovuln::projection
