#pragma once

// Shareable UI state and its URL-safe token codec.

#include "geovuln/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace geovuln::state {

inline constexpr int kStateVersion = 1;
inline constexpr std::size_t kMaxMaps = 4;
inline constexpr double kMaxZoom = 22.0;

enum class SortDirection { asc, desc };

struct CensusSelection {
    std::string layer_id;
    std::string metric;
    std::string palette;
    friend bool operator==(const CensusSelection&, const CensusSelection&) = default;
};

struct Viewport {
    double lon = -157.5;
    double lat = 20.5;
    double zoom = 7.0;
    friend bool operator==(const Viewport&, const Viewport&) = default;
};

struct MapState {
    std::optional<CensusSelection> census_layer; // at most one indicator per map
    std::set<std::string> hazard_vectors;
    std::optional<std::string> raster; // at most one raster per map
    std::set<std::string> points;
    Viewport viewport;
    friend bool operator==(const MapState&, const MapState&) = default;
};

struct TableSort {
    std::string column;
    SortDirection direction = SortDirection::asc;
    friend bool operator==(const TableSort&, const TableSort&) = default;
};

struct TableState {
    std::string dataset;
    std::optional<TableSort> sort;
    std::optional<std::string> search;
    friend bool operator==(const TableState&, const TableState&) = default;
};

struct AppState {
    int version = kStateVersion;
    std::vector<MapState> maps;
    std::optional<TableState> table;
    friend bool operator==(const AppState&, const AppState&) = default;
};

/// One empty map over Hawaiʻi, no layers, no table.
inline AppState default_state()
{
    AppState s;
    s.maps.emplace_back();
    return s;
}

inline void validate(const AppState& s)
{
    if (s.version != kStateVersion) throw DomainError("unsupported state version " + std::to_string(s.version));
    if (s.maps.size() > kMaxMaps) throw DomainError("state violates map limit");
    for (const auto& m : s.maps) {
        const auto& v = m.viewport;
        if (!std::isfinite(v.lon) || std::abs(v.lon) > 180.0 || !std::isfinite(v.lat) || std::abs(v.lat) > 90.0)
            throw DomainError("state viewport center outside EPSG:4326");
        if (!std::isfinite(v.zoom) || v.zoom < 0.0 || v.zoom > kMaxZoom) throw DomainError("state viewport zoom out of range");
        if (m.census_layer && (m.census_layer->layer_id.empty() || m.census_layer->metric.empty()))
            throw DomainError("census selection needs a layer and a metric");
        if (m.raster && m.raster->empty()) throw DomainError("empty raster id");
        for (const auto* ids : {&m.hazard_vectors, &m.points})
            for (const auto& id : *ids)
                if (id.empty()) throw DomainError("empty layer id");
    }
    if (s.table) {
        if (s.table->dataset.empty()) throw DomainError("table state needs a dataset");
        if (s.table->sort && s.table->sort->column.empty()) throw DomainError("table sort needs a column");
    }
}

// base64url without padding.

namespace detail {

inline constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

inline std::string base64url_encode(std::string_view in)
{
    std::string out;
    out.reserve((in.size() * 4 + 2) / 3);
    std::size_t i = 0;
    for (; i + 3 <= in.size(); i += 3) {
        const std::uint32_t v = (std::uint32_t(std::uint8_t(in[i])) << 16) | (std::uint32_t(std::uint8_t(in[i + 1])) << 8)
            | std::uint8_t(in[i + 2]);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
        out += kAlphabet[v & 63];
    }
    const std::size_t rest = in.size() - i;
    if (rest == 1) {
        const std::uint32_t v = std::uint32_t(std::uint8_t(in[i])) << 16;
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
    } else if (rest == 2) {
        const std::uint32_t v = (std::uint32_t(std::uint8_t(in[i])) << 16) | (std::uint32_t(std::uint8_t(in[i + 1])) << 8);
        out += kAlphabet[(v >> 18) & 63];
        out += kAlphabet[(v >> 12) & 63];
        out += kAlphabet[(v >> 6) & 63];
    }
    return out;
}

inline std::optional<std::string> base64url_decode(std::string_view in)
{
    std::array<int, 256> lookup;
    lookup.fill(-1);
    for (std::size_t k = 0; k < kAlphabet.size(); ++k) lookup[static_cast<std::uint8_t>(kAlphabet[k])] = int(k);
    if (in.size() % 4 == 1) return std::nullopt;
    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : in) {
        const int v = lookup[static_cast<std::uint8_t>(c)];
        if (v < 0) return std::nullopt;
        acc = (acc << 6) | std::uint32_t(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    // Leftover bits must be zero for a canonical encoding.
    if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) return std::nullopt;
    return out;
}

using json = nlohmann::json;

inline json ids_json(const std::set<std::string>& ids) { return json(std::vector<std::string>(ids.begin(), ids.end())); }

inline json to_json(const AppState& s)
{
    json maps = json::array();
    for (const auto& m : s.maps) {
        json jm = {{"hazard_vectors", ids_json(m.hazard_vectors)},
                   {"points", ids_json(m.points)},
                   {"viewport", {{"center", {m.viewport.lon, m.viewport.lat}}, {"zoom", m.viewport.zoom}}}};
        if (m.census_layer)
            jm["census_layer"] = {{"layer_id", m.census_layer->layer_id},
                                  {"metric", m.census_layer->metric},
                                  {"palette", m.census_layer->palette}};
        if (m.raster) jm["raster"] = *m.raster;
        maps.push_back(std::move(jm));
    }
    json out = {{"version", s.version}, {"maps", std::move(maps)}};
    if (s.table) {
        json t = {{"dataset", s.table->dataset}};
        if (s.table->sort)
            t["sort"] = {{"column", s.table->sort->column},
                         {"direction", s.table->sort->direction == SortDirection::asc ? "asc" : "desc"}};
        if (s.table->search) t["search"] = *s.table->search;
        out["table"] = std::move(t);
    }
    return out;
}

inline const json* optional_member(const json& obj, const char* key)
{
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

inline std::set<std::string> ids_from(const json& obj, const char* key)
{
    std::set<std::string> out;
    const json* arr = optional_member(obj, key);
    if (!arr) return out;
    if (!arr->is_array()) throw DomainError(std::string(key) + " must be a list");
    for (const auto& id : *arr)
        if (!out.insert(id.get<std::string>()).second) throw DomainError("duplicate id in " + std::string(key));
    return out;
}

inline AppState from_json(const json& j)
{
    if (!j.is_object()) throw DomainError("state must be an object");
    AppState s;
    s.version = j.at("version").get<int>();
    if (s.version != kStateVersion) throw DomainError("unsupported state version " + std::to_string(s.version));
    for (const auto& jm : j.at("maps")) {
        if (!jm.is_object()) throw DomainError("map entry must be an object");
        MapState m;
        if (const json* c = optional_member(jm, "census_layer")) {
            if (!c->is_object()) throw DomainError("a map holds a single census layer");
            m.census_layer = CensusSelection{c->at("layer_id").get<std::string>(), c->at("metric").get<std::string>(),
                                             c->value("palette", std::string())};
        }
        if (const json* r = optional_member(jm, "raster")) {
            if (!r->is_string()) throw DomainError("a map holds a single raster");
            m.raster = r->get<std::string>();
        }
        m.hazard_vectors = ids_from(jm, "hazard_vectors");
        m.points = ids_from(jm, "points");
        const auto& vp = jm.at("viewport");
        const auto& center = vp.at("center");
        if (!center.is_array() || center.size() != 2) throw DomainError("viewport center must be [lon, lat]");
        m.viewport = {center[0].get<double>(), center[1].get<double>(), vp.at("zoom").get<double>()};
        s.maps.push_back(std::move(m));
    }
    if (const json* t = optional_member(j, "table")) {
        TableState ts;
        ts.dataset = t->at("dataset").get<std::string>();
        if (const json* sort = optional_member(*t, "sort")) {
            const auto dir = sort->at("direction").get<std::string>();
            if (dir != "asc" && dir != "desc") throw DomainError("sort direction must be asc or desc");
            ts.sort = TableSort{sort->at("column").get<std::string>(), dir == "asc" ? SortDirection::asc : SortDirection::desc};
        }
        if (const json* q = optional_member(*t, "search")) ts.search = q->get<std::string>();
        s.table = std::move(ts);
    }
    return s;
}

} // namespace detail

/// Canonical JSON (sorted keys, no whitespace) as unpadded base64url.
inline std::string encode_state(const AppState& s)
{
    validate(s);
    return detail::base64url_encode(
        detail::to_json(s).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

inline AppState decode_state(std::string_view token)
{
    const auto raw = detail::base64url_decode(token);
    if (!raw || raw->empty()) throw ParseError("malformed state token");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(*raw);
    } catch (const nlohmann::json::exception&) {
        throw ParseError("malformed state token");
    }
    AppState s;
    try {
        s = detail::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed state token: ") + e.what());
    }
    validate(s);
    return s;
}

inline nlohmann::json state_to_json(const AppState& s) { return detail::to_json(s); }

} // namespace geovuln::state
