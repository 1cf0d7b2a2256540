#pragma once

#include "geovuln/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace geovuln {

inline constexpr int kEpsgWgs84 = 4326;
inline constexpr int kEpsgWebMercator = 3857;
inline constexpr int kEpsgUtm4N = 3750;

struct Coordinate {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Coordinate&, const Coordinate&) = default;
};

using Path = std::vector<Coordinate>;

struct Point {
    Coordinate coord;
    friend bool operator==(const Point&, const Point&) = default;
};

struct MultiPoint {
    Path points;
    friend bool operator==(const MultiPoint&, const MultiPoint&) = default;
};

struct LineString {
    Path points;
    friend bool operator==(const LineString&, const LineString&) = default;
};

struct MultiLineString {
    std::vector<Path> lines;
    friend bool operator==(const MultiLineString&, const MultiLineString&) = default;
};

/// rings[0] is the exterior, the rest are holes. Rings are closed.
struct Polygon {
    std::vector<Path> rings;
    friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct MultiPolygon {
    std::vector<Polygon> polygons;
    friend bool operator==(const MultiPolygon&, const MultiPolygon&) = default;
};

using Geometry = std::variant<Point, MultiPoint, LineString, MultiLineString, Polygon, MultiPolygon>;

/// How a coordinate sequence participates in its geometry.
enum class PathRole { points, line, ring };

inline std::string_view kind_name(const Geometry& g)
{
    static constexpr std::string_view names[] = {"Point",           "MultiPoint", "LineString",
                                                 "MultiLineString", "Polygon",    "MultiPolygon"};
    return names[g.index()];
}

/// Calls fn(std::span<const Coordinate>, PathRole) once per coordinate sequence.
template <class Fn>
void for_each_path(const Geometry& g, Fn&& fn)
{
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Point>) {
                fn(std::span<const Coordinate>(&v.coord, 1), PathRole::points);
            } else if constexpr (std::is_same_v<T, MultiPoint>) {
                fn(std::span<const Coordinate>(v.points), PathRole::points);
            } else if constexpr (std::is_same_v<T, LineString>) {
                fn(std::span<const Coordinate>(v.points), PathRole::line);
            } else if constexpr (std::is_same_v<T, MultiLineString>) {
                for (const auto& line : v.lines) fn(std::span<const Coordinate>(line), PathRole::line);
            } else if constexpr (std::is_same_v<T, Polygon>) {
                for (const auto& ring : v.rings) fn(std::span<const Coordinate>(ring), PathRole::ring);
            } else {
                for (const auto& poly : v.polygons)
                    for (const auto& ring : poly.rings) fn(std::span<const Coordinate>(ring), PathRole::ring);
            }
        },
        g);
}

/// Rebuilds g with every path replaced by fn(path, role). The structure
/// (kinds, part counts) is preserved.
template <class Fn>
Geometry map_paths(const Geometry& g, Fn&& fn)
{
    return std::visit(
        [&](const auto& v) -> Geometry {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Point>) {
                Path p = fn(Path{v.coord}, PathRole::points);
                return Point{p.empty() ? v.coord : p.front()};
            } else if constexpr (std::is_same_v<T, MultiPoint>) {
                return MultiPoint{fn(v.points, PathRole::points)};
            } else if constexpr (std::is_same_v<T, LineString>) {
                return LineString{fn(v.points, PathRole::line)};
            } else if constexpr (std::is_same_v<T, MultiLineString>) {
                MultiLineString out;
                out.lines.reserve(v.lines.size());
                for (const auto& line : v.lines) out.lines.push_back(fn(line, PathRole::line));
                return out;
            } else if constexpr (std::is_same_v<T, Polygon>) {
                Polygon out;
                out.rings.reserve(v.rings.size());
                for (const auto& ring : v.rings) out.rings.push_back(fn(ring, PathRole::ring));
                return out;
            } else {
                MultiPolygon out;
                out.polygons.reserve(v.polygons.size());
                for (const auto& poly : v.polygons) {
                    Polygon p;
                    p.rings.reserve(poly.rings.size());
                    for (const auto& ring : poly.rings) p.rings.push_back(fn(ring, PathRole::ring));
                    out.polygons.push_back(std::move(p));
                }
                return out;
            }
        },
        g);
}

template <class Fn>
Geometry map_coordinates(const Geometry& g, Fn&& fn)
{
    return map_paths(g, [&](const Path& path, PathRole) {
        Path out;
        out.reserve(path.size());
        for (const auto& c : path) out.push_back(fn(c));
        return out;
    });
}

/// Total coordinates across all parts. Ring closure points count.
inline std::size_t vertex_count(const Geometry& g)
{
    std::size_t n = 0;
    for_each_path(g, [&](std::span<const Coordinate> path, PathRole) { n += path.size(); });
    return n;
}

/// Checks the structural invariants; throws DomainError naming the first
/// violation.
inline void validate(const Geometry& g)
{
    std::size_t total = 0;
    for_each_path(g, [&](std::span<const Coordinate> path, PathRole role) {
        total += path.size();
        for (const auto& c : path) {
            if (!std::isfinite(c.x) || !std::isfinite(c.y)) throw DomainError("non-finite coordinate");
        }
        if (role == PathRole::line && path.size() < 2) throw DomainError("LineString needs at least 2 coordinates");
        if (role == PathRole::ring) {
            if (path.size() < 4) throw DomainError("ring needs at least 4 coordinates");
            if (path.front() != path.back()) throw DomainError("ring is not closed");
        }
    });
    if (const auto* mp = std::get_if<MultiPolygon>(&g); mp && mp->polygons.empty())
        throw DomainError("MultiPolygon needs at least 1 polygon");
    if (const auto* p = std::get_if<Polygon>(&g); p && p->rings.empty()) throw DomainError("Polygon has no rings");
    if (total == 0) throw DomainError("empty geometry");
}

struct BBox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    friend bool operator==(const BBox&, const BBox&) = default;

    bool contains(const Coordinate& c) const
    {
        return c.x >= min_x && c.x <= max_x && c.y >= min_y && c.y <= max_y;
    }

    /// Closed-interval intersection: touching boxes intersect.
    bool intersects(const BBox& o) const
    {
        return min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
    }

    void expand(const BBox& o)
    {
        min_x = std::min(min_x, o.min_x);
        min_y = std::min(min_y, o.min_y);
        max_x = std::max(max_x, o.max_x);
        max_y = std::max(max_y, o.max_y);
    }

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    Coordinate center() const { return {(min_x + max_x) / 2.0, (min_y + max_y) / 2.0}; }

    static BBox world() { return {-180.0, -90.0, 180.0, 90.0}; }
};

inline BBox bbox_of(const Geometry& g)
{
    bool any = false;
    BBox box;
    for_each_path(g, [&](std::span<const Coordinate> path, PathRole) {
        for (const auto& c : path) {
            if (!any) {
                box = {c.x, c.y, c.x, c.y};
                any = true;
                continue;
            }
            box.min_x = std::min(box.min_x, c.x);
            box.min_y = std::min(box.min_y, c.y);
            box.max_x = std::max(box.max_x, c.x);
            box.max_y = std::max(box.max_y, c.y);
        }
    });
    if (!any) throw DomainError("empty geometry");
    return box;
}

/// Attribute scalar. Dates are carried as ISO-8601 text.
using Value = std::variant<std::monostate, bool, double, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

/// Insertion-ordered name → value map with unique names.
class Attributes {
public:
    using Entry = std::pair<std::string, Value>;

    Attributes() = default;
    Attributes(std::initializer_list<Entry> init)
    {
        for (const auto& [k, v] : init) set(k, v);
    }

    /// Replaces an existing entry in place or appends a new one.
    void set(std::string name, Value value)
    {
        if (auto* v = find(name)) {
            *v = std::move(value);
            return;
        }
        entries_.emplace_back(std::move(name), std::move(value));
    }

    const Value* find(std::string_view name) const
    {
        for (const auto& e : entries_)
            if (e.first == name) return &e.second;
        return nullptr;
    }

    Value* find(std::string_view name)
    {
        for (auto& e : entries_)
            if (e.first == name) return &e.second;
        return nullptr;
    }

    bool contains(std::string_view name) const { return find(name) != nullptr; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    friend bool operator==(const Attributes&, const Attributes&) = default;

private:
    std::vector<Entry> entries_;
};

struct Feature {
    Geometry geometry;
    Attributes attributes;
    std::optional<std::string> id;

    friend bool operator==(const Feature&, const Feature&) = default;
};

struct FeatureCollection {
    int crs = kEpsgWgs84;
    std::vector<Feature> features;

    friend bool operator==(const FeatureCollection&, const FeatureCollection&) = default;
};

inline std::size_t vertex_count(const FeatureCollection& fc)
{
    std::size_t n = 0;
    for (const auto& f : fc.features) n += vertex_count(f.geometry);
    return n;
}

inline std::optional<BBox> bbox_of(const FeatureCollection& fc)
{
    std::optional<BBox> box;
    for (const auto& f : fc.features) {
        const BBox b = bbox_of(f.geometry);
        if (box)
            box->expand(b);
        else
            box = b;
    }
    return box;
}

} // namespace geovuln
