#pragma once

#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"
#include "geovuln/simplify.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

namespace geovuln::geojson {

struct PrecisionPolicy {
    int decimals = 5;
};

namespace detail {

inline void append_number(std::string& out, double v, std::chars_format fmt)
{
    if (!std::isfinite(v)) {
        out += "null";
        return;
    }
    std::array<char, 512> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, fmt);
    out.append(buf.data(), res.ptr);
}

// Invalid UTF-8 (e.g. Latin-1 DBF text) is replaced rather than rejected.
inline void append_string(std::string& out, std::string_view s)
{
    out += nlohmann::json(s).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline void append_value(std::string& out, const Value& v)
{
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                out += "null";
            else if constexpr (std::is_same_v<T, bool>)
                out += x ? "true" : "false";
            else if constexpr (std::is_same_v<T, double>)
                append_number(out, x, std::chars_format::general);
            else
                append_string(out, x);
        },
        v);
}

inline void append_coord(std::string& out, const Coordinate& c)
{
    // Values are already quantized, so the shortest fixed form carries at
    // most `decimals` fractional digits with trailing zeros trimmed.
    out += '[';
    append_number(out, c.x, std::chars_format::fixed);
    out += ',';
    append_number(out, c.y, std::chars_format::fixed);
    out += ']';
}

inline void append_path(std::string& out, const Path& path)
{
    out += '[';
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i) out += ',';
        append_coord(out, path[i]);
    }
    out += ']';
}

inline void append_rings(std::string& out, const std::vector<Path>& rings)
{
    out += '[';
    for (std::size_t i = 0; i < rings.size(); ++i) {
        if (i) out += ',';
        append_path(out, rings[i]);
    }
    out += ']';
}

inline void append_geometry(std::string& out, const Geometry& g)
{
    out += R"({"type":")";
    out += kind_name(g);
    out += R"(","coordinates":)";
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Point>) {
                append_coord(out, v.coord);
            } else if constexpr (std::is_same_v<T, MultiPoint> || std::is_same_v<T, LineString>) {
                append_path(out, v.points);
            } else if constexpr (std::is_same_v<T, MultiLineString>) {
                append_rings(out, v.lines);
            } else if constexpr (std::is_same_v<T, Polygon>) {
                append_rings(out, v.rings);
            } else {
                out += '[';
                for (std::size_t i = 0; i < v.polygons.size(); ++i) {
                    if (i) out += ',';
                    append_rings(out, v.polygons[i].rings);
                }
                out += ']';
            }
        },
        g);
    out += '}';
}

} // namespace detail

/// Serializes one feature (coordinates must already be quantized).
inline void append_feature(std::string& out, const Feature& f)
{
    out += R"({"type":"Feature","properties":{)";
    bool first = true;
    for (const auto& [name, value] : f.attributes) {
        if (!first) out += ',';
        first = false;
        detail::append_string(out, name);
        out += ':';
        detail::append_value(out, value);
    }
    out += R"(},"geometry":)";
    detail::append_geometry(out, f.geometry);
    if (f.id) {
        out += R"(,"id":)";
        detail::append_string(out, *f.id);
    }
    out += '}';
}

/// RFC 7946 text with coordinates rounded to policy.decimals. Output is
/// deterministic for a given collection.
inline std::string write_geojson(const FeatureCollection& fc, PrecisionPolicy policy = {})
{
    if (fc.crs != kEpsgWgs84) throw DomainError("GeoJSON requires EPSG:4326");
    if (policy.decimals < 0 || policy.decimals > 15) throw DomainError("decimals must be within 0..15");
    std::string out = R"({"type":"FeatureCollection","features":[)";
    for (std::size_t i = 0; i < fc.features.size(); ++i) {
        if (i) out += ',';
        const auto& f = fc.features[i];
        append_feature(out, {quantize(f.geometry, policy.decimals), f.attributes, f.id});
    }
    out += "]}";
    return out;
}

namespace detail {

using json = nlohmann::ordered_json;

inline Coordinate read_coord(const json& j)
{
    if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number())
        throw ParseError("invalid coordinate");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline Path read_path(const json& j)
{
    if (!j.is_array()) throw ParseError("invalid coordinate array");
    Path p;
    p.reserve(j.size());
    for (const auto& c : j) p.push_back(read_coord(c));
    return p;
}

inline std::vector<Path> read_paths(const json& j)
{
    if (!j.is_array()) throw ParseError("invalid coordinate array");
    std::vector<Path> out;
    for (const auto& p : j) out.push_back(read_path(p));
    return out;
}

inline Geometry read_geometry(const json& j)
{
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) throw ParseError("unsupported geometry");
    const auto type = j["type"].get<std::string>();
    const auto coords = j.value("coordinates", json());
    Geometry g;
    if (type == "Point")
        g = Point{read_coord(coords)};
    else if (type == "MultiPoint")
        g = MultiPoint{read_path(coords)};
    else if (type == "LineString")
        g = LineString{read_path(coords)};
    else if (type == "MultiLineString")
        g = MultiLineString{read_paths(coords)};
    else if (type == "Polygon")
        g = Polygon{read_paths(coords)};
    else if (type == "MultiPolygon") {
        if (!coords.is_array()) throw ParseError("invalid coordinate array");
        MultiPolygon mp;
        for (const auto& poly : coords) mp.polygons.push_back(Polygon{read_paths(poly)});
        g = std::move(mp);
    } else
        throw ParseError("unsupported geometry");
    try {
        validate(g);
    } catch (const DomainError& e) {
        throw ParseError(std::string("invalid ") + type + ": " + e.what());
    }
    return g;
}

inline Value read_value(const json& j)
{
    if (j.is_null()) return Value{};
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    return j.dump();
}

inline void read_feature(const json& j, FeatureCollection& fc)
{
    if (!j.is_object()) throw ParseError("feature is not an object");
    const auto geom = j.find("geometry");
    if (geom == j.end() || geom->is_null()) return;
    Feature f{read_geometry(*geom), {}, std::nullopt};
    if (const auto props = j.find("properties"); props != j.end() && props->is_object())
        for (const auto& [k, v] : props->items()) f.attributes.set(k, read_value(v));
    if (const auto id = j.find("id"); id != j.end()) {
        if (id->is_string())
            f.id = id->get<std::string>();
        else if (id->is_number())
            f.id = id->dump();
    }
    fc.features.push_back(std::move(f));
}

} // namespace detail

/// Parses a FeatureCollection, a Feature, or a bare geometry. Foreign members
/// are ignored; features with null geometry are skipped.
inline FeatureCollection read_geojson(std::string_view text)
{
    using json = nlohmann::ordered_json;
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("parse error at byte " + std::to_string(e.byte));
    }
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) throw ParseError("unsupported geometry");

    FeatureCollection fc;
    fc.crs = kEpsgWgs84;
    const auto type = doc["type"].get<std::string>();
    if (type == "FeatureCollection") {
        const auto features = doc.find("features");
        if (features == doc.end() || !features->is_array()) throw ParseError("FeatureCollection lacks features");
        for (const auto& f : *features) detail::read_feature(f, fc);
    } else if (type == "Feature") {
        detail::read_feature(doc, fc);
    } else {
        fc.features.push_back({detail::read_geometry(doc), {}, std::nullopt});
    }
    return fc;
}

} // namespace geovuln::geojson
