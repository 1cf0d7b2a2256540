#pragma once

#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace geovuln {

/// Distance from p to the closed segment [a, b].
inline double segment_distance(const Coordinate& p, const Coordinate& a, const Coordinate& b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

/// Twice the signed area of a closed ring (positive = counter-clockwise).
inline double ring_area2(std::span<const Coordinate> ring)
{
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) sum += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
    return sum;
}

/// Douglas–Peucker over `points`, returning the indices that survive in
/// ascending order. Endpoints always survive; an interior point survives
/// iff its distance to the current chord is strictly greater than `tol`.
inline std::vector<std::size_t> simplify_indices(std::span<const Coordinate> points, double tolerance)
{
    if (points.size() < 2) throw DomainError("degenerate polyline");
    if (!(tolerance >= 0.0)) throw DomainError("tolerance must be >= 0");

    std::vector<char> keep(points.size(), 0);
    keep.front() = keep.back() = 1;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, points.size() - 1}};
    while (!stack.empty()) {
        const auto [first, last] = stack.back();
        stack.pop_back();
        double worst = -1.0;
        std::size_t worst_index = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const double d = segment_distance(points[i], points[first], points[last]);
            if (d > worst) {
                worst = d;
                worst_index = i;
            }
        }
        if (worst > tolerance) {
            keep[worst_index] = 1;
            stack.emplace_back(worst_index, last);
            stack.emplace_back(first, worst_index);
        }
    }

    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i]) out.push_back(i);
    return out;
}

inline Path simplify_polyline(std::span<const Coordinate> points, double tolerance)
{
    Path out;
    for (std::size_t i : simplify_indices(points, tolerance)) out.push_back(points[i]);
    return out;
}

struct SimplifiedPath {
    Path path;
    /// Largest distance of an original vertex from the simplified path.
    double max_deviation = 0.0;
    /// The ring degenerated and was kept as-is.
    bool retained = false;
};

/// Simplifies one path according to its role. Rings are anchored at their
/// first vertex; a ring that would drop below 4 points or to zero area is
/// returned unchanged.
inline SimplifiedPath simplify_path(std::span<const Coordinate> path, PathRole role, double tolerance)
{
    if (role == PathRole::points || path.size() < 3) return {Path(path.begin(), path.end()), 0.0, false};

    const auto kept = simplify_indices(path, tolerance);
    SimplifiedPath out;
    out.path.reserve(kept.size());
    for (std::size_t i : kept) out.path.push_back(path[i]);

    if (role == PathRole::ring && (out.path.size() < 4 || ring_area2(out.path) == 0.0))
        return {Path(path.begin(), path.end()), 0.0, true};

    for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
        const auto& a = path[kept[k]];
        const auto& b = path[kept[k + 1]];
        for (std::size_t i = kept[k] + 1; i < kept[k + 1]; ++i)
            out.max_deviation = std::max(out.max_deviation, segment_distance(path[i], a, b));
    }
    return out;
}

inline Geometry simplify_geometry(const Geometry& g, double tolerance)
{
    if (!(tolerance >= 0.0)) throw DomainError("tolerance must be >= 0");
    return map_paths(g, [&](const Path& path, PathRole role) { return simplify_path(path, role, tolerance).path; });
}

// Precision reduction.

namespace detail {

inline constexpr std::array<double, 16> kPow10 = {1e0, 1e1, 1e2,  1e3,  1e4,  1e5,  1e6,  1e7,
                                                  1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15};

/// Number of fractional digits in the shortest round-trip decimal form of x.
inline int shortest_fraction_digits(double x)
{
    std::array<char, 512> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed);
    const std::string_view s(buf.data(), static_cast<std::size_t>(res.ptr - buf.data()));
    const auto dot = s.find('.');
    return dot == std::string_view::npos ? 0 : static_cast<int>(s.size() - dot - 1);
}

} // namespace detail

/// Rounds x half-away-from-zero to `decimals` fractional digits. The rounding
/// decision uses the exact binary value of x·10^decimals, so it is
/// reproducible across platforms. Values already expressible in `decimals`
/// digits are returned unchanged.
inline double round_decimals(double x, int decimals)
{
    if (decimals < 0 || decimals > 15) throw DomainError("decimals must be within 0..15");
    if (!std::isfinite(x) || detail::shortest_fraction_digits(x) <= decimals) return x;
    const double scale = detail::kPow10[static_cast<std::size_t>(decimals)];
    const double product = x * scale;
    if (std::abs(product) >= 4503599627370496.0) return x; // 2^52: no fractional bits left
    const double residual = std::fma(x, scale, -product);
    double n = std::round(product);
    const double diff = (product - n) + residual;
    if (diff > 0.5 || (diff == 0.5 && n >= 0.0))
        n += 1.0;
    else if (diff < -0.5 || (diff == -0.5 && n <= 0.0))
        n -= 1.0;
    return n / scale;
}

struct QuantizeResult {
    Geometry geometry;
    /// Paths kept at full precision because rounding collapsed them.
    std::size_t warnings = 0;
};

inline QuantizeResult quantize_counted(const Geometry& g, int decimals)
{
    if (decimals < 0 || decimals > 15) throw DomainError("decimals must be within 0..15");
    std::size_t warnings = 0;
    Geometry out = map_paths(g, [&](const Path& path, PathRole role) {
        Path rounded;
        rounded.reserve(path.size());
        for (std::size_t i = 0; i < path.size(); ++i) {
            const Coordinate c{round_decimals(path[i].x, decimals), round_decimals(path[i].y, decimals)};
            // Only duplicates introduced by rounding are collapsed.
            if (!rounded.empty() && c == rounded.back() && path[i] != path[i - 1]) continue;
            rounded.push_back(c);
        }
        const std::size_t minimum = role == PathRole::ring ? 4 : role == PathRole::line ? 2 : 1;
        if (rounded.size() < minimum && path.size() >= minimum) {
            ++warnings;
            return path;
        }
        return rounded;
    });
    return {std::move(out), warnings};
}

inline Geometry quantize(const Geometry& g, int decimals) { return quantize_counted(g, decimals).geometry; }

inline FeatureCollection quantize(const FeatureCollection& fc, int decimals, std::size_t* warnings = nullptr)
{
    FeatureCollection out{fc.crs, {}};
    out.features.reserve(fc.features.size());
    for (const auto& f : fc.features) {
        auto q = quantize_counted(f.geometry, decimals);
        if (warnings) *warnings += q.warnings;
        out.features.push_back({std::move(q.geometry), f.attributes, f.id});
    }
    return out;
}

inline FeatureCollection simplify_collection(const FeatureCollection& fc, double tolerance)
{
    FeatureCollection out{fc.crs, {}};
    out.features.reserve(fc.features.size());
    for (const auto& f : fc.features) out.features.push_back({simplify_geometry(f.geometry, tolerance), f.attributes, f.id});
    return out;
}

/// Keeps exactly `keep` on every feature, in that order. Features lacking a
/// kept attribute get null.
inline FeatureCollection prune_attributes(const FeatureCollection& fc, std::span<const std::string> keep)
{
    for (const auto& name : keep) {
        const bool known = std::any_of(fc.features.begin(), fc.features.end(),
                                       [&](const Feature& f) { return f.attributes.contains(name); });
        if (!known) throw DomainError("attribute " + name + " not found");
    }
    FeatureCollection out{fc.crs, {}};
    out.features.reserve(fc.features.size());
    for (const auto& f : fc.features) {
        Attributes attrs;
        for (const auto& name : keep) {
            const Value* v = f.attributes.find(name);
            attrs.set(name, v ? *v : Value{});
        }
        out.features.push_back({f.geometry, std::move(attrs), f.id});
    }
    return out;
}

} // namespace geovuln
