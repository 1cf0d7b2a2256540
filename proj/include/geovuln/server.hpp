#pragma once

// In-memory layer service: catalog, vector/raster/cluster/table/search
// queries and the state validation helper. Every handler is a pure function
// of the loaded snapshot and returns a complete HTTP response value.

#include "geovuln/bytes.hpp"
#include "geovuln/cluster.hpp"
#include "geovuln/error.hpp"
#include "geovuln/geojson.hpp"
#include "geovuln/geometry.hpp"
#include "geovuln/raster.hpp"
#include "geovuln/state.hpp"
#include "geovuln/tabular.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geovuln::server {

enum class LayerKind { census_map, point, hazard_vector, hazard_raster };

inline std::string_view kind_name(LayerKind k)
{
    switch (k) {
    case LayerKind::census_map: return "census_map";
    case LayerKind::point: return "point";
    case LayerKind::hazard_vector: return "hazard_vector";
    case LayerKind::hazard_raster: return "hazard_raster";
    }
    return "";
}

/// Control-panel tab a layer kind belongs to.
inline std::string_view tab_name(LayerKind k)
{
    switch (k) {
    case LayerKind::census_map: return "Maps";
    case LayerKind::point: return "Points";
    case LayerKind::hazard_vector: return "Hazards";
    case LayerKind::hazard_raster: return "Rasters";
    }
    return "";
}

inline LayerKind parse_kind(std::string_view s)
{
    if (s == "census_map") return LayerKind::census_map;
    if (s == "point") return LayerKind::point;
    if (s == "hazard_vector") return LayerKind::hazard_vector;
    if (s == "hazard_raster") return LayerKind::hazard_raster;
    throw DomainError("unknown layer kind " + std::string(s));
}

struct CatalogEntry {
    std::string id;
    LayerKind kind = LayerKind::hazard_vector;
    std::string label;
    std::optional<BBox> bbox;
    std::vector<std::string> metrics; // census layers only
    nlohmann::json style = nlohmann::json::object();
};

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

inline Response json_response(const nlohmann::json& j, int status = 200) { return {status, "application/json", j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)}; }

inline Response error_response(int status, std::string_view message)
{
    return json_response(nlohmann::json{{"error", message}}, status);
}

/// Thrown by parameter parsing and lookups; carries the HTTP status.
class HttpError : public Error {
public:
    HttpError(int status, const std::string& message) : Error(message), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

/// Request parameters, already URL-decoded.
using Params = std::map<std::string, std::string>;

inline std::optional<std::string> param(const Params& p, const std::string& key)
{
    const auto it = p.find(key);
    if (it == p.end()) return std::nullopt;
    return it->second;
}

/// "w,s,e,n" → BBox; anything else is a 400.
inline BBox parse_bbox(std::string_view text)
{
    std::array<double, 4> v{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        const auto comma = text.find(',', start);
        if ((k < 3) == (comma == std::string_view::npos)) throw HttpError(400, "malformed bbox");
        auto part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        if (!part.empty() && part.front() == '+') part.remove_prefix(1);
        const auto res = std::from_chars(part.data(), part.data() + part.size(), v[k]);
        if (part.empty() || res.ec != std::errc{} || res.ptr != part.data() + part.size() || !std::isfinite(v[k]))
            throw HttpError(400, "malformed bbox");
        start = comma + 1;
    }
    const BBox box{v[0], v[1], v[2], v[3]};
    if (box.min_x > box.max_x || box.min_y > box.max_y) throw HttpError(400, "malformed bbox");
    return box;
}

inline long long parse_integer(std::string_view text, const char* name)
{
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw HttpError(400, std::string("malformed ") + name);
    return v;
}

struct TableQuery {
    std::string dataset;
    std::optional<std::string> sort_column;
    state::SortDirection direction = state::SortDirection::asc;
    std::optional<std::string> search;
    std::size_t page = 0;
    std::size_t page_size = 50;

    static TableQuery from_params(std::string dataset, const Params& p)
    {
        TableQuery q;
        q.dataset = std::move(dataset);
        if (auto s = param(p, "sort"); s && !s->empty()) q.sort_column = *s;
        if (auto d = param(p, "dir"); d && !d->empty()) {
            if (*d == "asc")
                q.direction = state::SortDirection::asc;
            else if (*d == "desc")
                q.direction = state::SortDirection::desc;
            else
                throw HttpError(400, "dir must be asc or desc");
        }
        if (auto s = param(p, "search"); s && !s->empty()) q.search = *s;
        if (auto s = param(p, "page")) {
            const auto v = parse_integer(*s, "page");
            if (v < 0) throw HttpError(400, "page must be >= 0");
            q.page = static_cast<std::size_t>(v);
        }
        if (auto s = param(p, "page_size")) {
            const auto v = parse_integer(*s, "page_size");
            if (v < 1 || v > 1000) throw HttpError(400, "page_size must be within 1..1000");
            q.page_size = static_cast<std::size_t>(v);
        }
        return q;
    }
};

struct GazetteerEntry {
    std::string name;
    double lon = 0.0;
    double lat = 0.0;
};

struct VectorLayer {
    FeatureCollection collection;
    std::vector<BBox> envelopes; // one per feature
};

namespace detail {

inline std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline nlohmann::json value_json(const Value& v)
{
    return std::visit(
        [](const auto& x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                return nullptr;
            else if constexpr (std::is_same_v<T, double>)
                return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
            else
                return x;
        },
        v);
}

/// Sort key order: numbers (and booleans) < text; null handled by caller.
inline int compare_values(const Value& a, const Value& b)
{
    auto rank = [](const Value& v) { return std::holds_alternative<std::string>(v) ? 1 : 0; };
    auto number = [](const Value& v) {
        if (const auto* d = std::get_if<double>(&v)) return *d;
        if (const auto* flag = std::get_if<bool>(&v)) return *flag ? 1.0 : 0.0;
        return 0.0;
    };
    if (rank(a) != rank(b)) return rank(a) < rank(b) ? -1 : 1;
    if (rank(a) == 1) {
        const auto& x = std::get<std::string>(a);
        const auto& y = std::get<std::string>(b);
        return x < y ? -1 : (y < x ? 1 : 0);
    }
    const double x = number(a);
    const double y = number(b);
    return x < y ? -1 : (y < x ? 1 : 0);
}

inline std::optional<std::string> feature_name(const Feature& f)
{
    for (const char* key : {"name", "NAME", "Name"})
        if (const auto* v = f.attributes.find(key))
            if (const auto* s = std::get_if<std::string>(v); s && !s->empty()) return *s;
    return std::nullopt;
}

} // namespace detail

/// Loaded, immutable snapshot of every processed layer.
class LayerService {
public:
    using Record = std::pair<const std::string*, const tabular::Row*>;

    LayerService() = default;

    // Registration (used while loading).

    void add_vector_layer(CatalogEntry entry, FeatureCollection fc)
    {
        if (fc.crs != kEpsgWgs84) throw DomainError("layer " + entry.id + " is not EPSG:4326");
        require_new(entry.id);
        VectorLayer layer;
        layer.envelopes.reserve(fc.features.size());
        for (const auto& f : fc.features) layer.envelopes.push_back(bbox_of(f.geometry));
        entry.bbox = bbox_of(fc);
        if (entry.kind == LayerKind::census_map && entry.metrics.empty()) entry.metrics = numeric_properties(fc);
        if (entry.kind == LayerKind::point) clusters_.emplace(entry.id, build_cluster_index(fc));
        add_gazetteer(entry.kind, fc);
        layer.collection = std::move(fc);
        vectors_.emplace(entry.id, std::move(layer));
        catalog_.push_back(std::move(entry));
    }

    void add_raster_layer(CatalogEntry entry, raster::RasterPyramid pyramid)
    {
        require_new(entry.id);
        entry.kind = LayerKind::hazard_raster;
        entry.bbox = pyramid.levels.front().extent();
        rasters_.emplace(entry.id, std::move(pyramid));
        catalog_.push_back(std::move(entry));
    }

    void set_store(tabular::VulnerabilityStore store) { store_ = std::move(store); }

    /// Census layers named after a dataset expose its metrics.
    void link_census_metrics()
    {
        for (auto& e : catalog_) {
            if (e.kind != LayerKind::census_map) continue;
            const std::string dataset = e.style.value("dataset", e.id);
            if (const auto it = store_.datasets.find(dataset); it != store_.datasets.end()) e.metrics = it->second.metrics;
        }
    }

    const std::vector<CatalogEntry>& catalog() const { return catalog_; }
    const tabular::VulnerabilityStore& store() const { return store_; }
    const std::vector<GazetteerEntry>& gazetteer() const { return gazetteer_; }

    // Typed queries.

    const CatalogEntry& entry(const std::string& id) const
    {
        for (const auto& e : catalog_)
            if (e.id == id) return e;
        throw HttpError(404, "layer not found");
    }

    /// Features whose envelope intersects bbox (all when bbox is absent).
    FeatureCollection layer_features(const std::string& id, const std::optional<BBox>& bbox) const
    {
        const auto& e = entry(id);
        if (e.kind == LayerKind::hazard_raster) throw HttpError(400, "not a vector layer");
        const auto& layer = vectors_.at(id);
        if (!bbox) return layer.collection;
        FeatureCollection out{layer.collection.crs, {}};
        for (std::size_t i = 0; i < layer.envelopes.size(); ++i)
            if (layer.envelopes[i].intersects(*bbox)) out.features.push_back(layer.collection.features[i]);
        return out;
    }

    const raster::RasterPyramid& pyramid(const std::string& id) const
    {
        if (entry(id).kind != LayerKind::hazard_raster) throw HttpError(400, "not a raster layer");
        return rasters_.at(id);
    }

    const cluster::ClusterIndex& cluster_index(const std::string& id) const
    {
        if (entry(id).kind != LayerKind::point) throw HttpError(400, "not a point layer");
        return clusters_.at(id);
    }

    const tabular::Dataset& dataset(const std::string& id) const
    {
        const auto it = store_.datasets.find(id);
        if (it == store_.datasets.end()) throw HttpError(404, "dataset not found");
        return it->second;
    }

    /// Search, then sort (nulls last, ties by GEOID), no pagination.
    std::vector<Record> table_matches(const TableQuery& q) const
    {
        const auto& ds = dataset(q.dataset);
        std::optional<std::size_t> sort_idx;
        bool sort_by_geoid = false;
        if (q.sort_column) {
            if (*q.sort_column == "GEOID") {
                sort_by_geoid = true;
            } else {
                const auto it = std::find(ds.metrics.begin(), ds.metrics.end(), *q.sort_column);
                if (it == ds.metrics.end()) throw HttpError(400, "unknown sort column " + *q.sort_column);
                sort_idx = static_cast<std::size_t>(it - ds.metrics.begin());
            }
        }

        const std::string needle = q.search ? detail::lower(*q.search) : std::string();
        std::vector<Record> rows;
        for (const auto& [geoid, row] : ds.records) {
            if (!needle.empty()) {
                bool hit = detail::lower(geoid).find(needle) != std::string::npos;
                for (std::size_t i = 0; !hit && i < row.size(); ++i)
                    hit = detail::lower(tabular::render_value(row[i])).find(needle) != std::string::npos;
                if (!hit) continue;
            }
            rows.emplace_back(&geoid, &row);
        }

        const bool desc = q.direction == state::SortDirection::desc;
        if (sort_by_geoid) {
            if (desc) std::reverse(rows.begin(), rows.end()); // records are GEOID-ordered already
        } else if (sort_idx) {
            const std::size_t col = *sort_idx;
            std::stable_sort(rows.begin(), rows.end(), [&](const Record& a, const Record& b) {
                const auto& va = (*a.second)[col];
                const auto& vb = (*b.second)[col];
                const bool na = is_null(va);
                const bool nb = is_null(vb);
                if (na != nb) return nb; // nulls last
                if (!na) {
                    const int c = detail::compare_values(va, vb);
                    if (c != 0) return desc ? c > 0 : c < 0;
                }
                return *a.first < *b.first;
            });
        }
        return rows;
    }

    nlohmann::ordered_json record_json(const tabular::Dataset& ds, const Record& r) const
    {
        nlohmann::ordered_json row;
        row["GEOID"] = *r.first;
        for (std::size_t i = 0; i < ds.metrics.size(); ++i) row[ds.metrics[i]] = detail::value_json((*r.second)[i]);
        return row;
    }

    std::vector<GazetteerEntry> search(std::string_view query) const
    {
        const auto q = detail::lower(query);
        struct Hit {
            int rank;
            const GazetteerEntry* entry;
        };
        std::vector<Hit> hits;
        for (const auto& g : gazetteer_) {
            const auto name = detail::lower(g.name);
            const auto pos = name.find(q);
            if (pos == std::string::npos) continue;
            hits.push_back({name == q ? 0 : pos == 0 ? 1 : 2, &g});
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
            if (a.rank != b.rank) return a.rank < b.rank;
            if (a.entry->name != b.entry->name) return a.entry->name < b.entry->name;
            if (a.entry->lon != b.entry->lon) return a.entry->lon < b.entry->lon;
            return a.entry->lat < b.entry->lat;
        });
        std::vector<GazetteerEntry> out;
        for (std::size_t i = 0; i < hits.size() && i < 10; ++i) out.push_back(*hits[i].entry);
        return out;
    }

    // HTTP handlers.

    Response handle_catalog() const
    {
        nlohmann::ordered_json layers = nlohmann::ordered_json::array();
        for (const auto& e : catalog_) {
            nlohmann::ordered_json j;
            j["id"] = e.id;
            j["kind"] = kind_name(e.kind);
            j["tab"] = tab_name(e.kind);
            j["label"] = e.label;
            j["bbox"] = e.bbox ? nlohmann::ordered_json{e.bbox->min_x, e.bbox->min_y, e.bbox->max_x, e.bbox->max_y}
                               : nlohmann::ordered_json(nullptr);
            j["metrics"] = e.metrics;
            j["style"] = e.style;
            layers.push_back(std::move(j));
        }
        return {200, "application/json", nlohmann::ordered_json{{"layers", std::move(layers)}}.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)};
    }

    Response handle_layer(const std::string& id, const Params& params) const
    {
        return guarded([&] {
            std::optional<BBox> bbox;
            if (auto b = param(params, "bbox")) bbox = parse_bbox(*b);
            const auto& e = entry(id);
            if (e.kind == LayerKind::hazard_raster) throw HttpError(400, "not a vector layer");
            const auto fc = layer_features(id, bbox);
            std::string body = R"({"type":"FeatureCollection","features":[)";
            for (std::size_t i = 0; i < fc.features.size(); ++i) {
                if (i) body += ',';
                geojson::append_feature(body, fc.features[i]);
            }
            body += "]}";
            return Response{200, "application/geo+json", std::move(body)};
        });
    }

    Response handle_raster_window(const std::string& id, const Params& params) const
    {
        return guarded([&] {
            const auto& pyr = pyramid(id);
            const BBox bbox = param(params, "bbox") ? parse_bbox(*param(params, "bbox")) : pyr.levels.front().extent();
            long long max_px = 512;
            if (auto m = param(params, "max_px")) max_px = parse_integer(*m, "max_px");
            if (max_px < 1 || max_px > 8192) throw HttpError(400, "max_px must be within 1..8192");
            raster::WindowGrid w;
            try {
                w = raster::read_window(pyr, bbox, static_cast<std::size_t>(max_px));
            } catch (const DomainError& e) {
                throw HttpError(400, e.what());
            }
            nlohmann::ordered_json j;
            j["width"] = w.width;
            j["height"] = w.height;
            j["bbox"] = {w.bbox.min_x, w.bbox.min_y, w.bbox.max_x, w.bbox.max_y};
            j["nodata"] = w.nodata && std::isfinite(*w.nodata) ? nlohmann::ordered_json(*w.nodata) : nlohmann::ordered_json(nullptr);
            nlohmann::ordered_json values = nlohmann::ordered_json::array();
            for (double v : w.values) values.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr));
            j["values"] = std::move(values);
            j["level_used"] = w.level_used;
            return Response{200, "application/json", j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)};
        });
    }

    Response handle_clusters(const std::string& id, const Params& params) const
    {
        return guarded([&] {
            const auto& index = cluster_index(id);
            const auto z = param(params, "zoom");
            if (!z) throw HttpError(400, "zoom is required");
            const auto zoom = parse_integer(*z, "zoom");
            if (zoom < 0 || zoom > index.options().max_zoom) throw HttpError(400, "zoom out of range");
            const BBox bbox = param(params, "bbox") ? parse_bbox(*param(params, "bbox")) : BBox::world();
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (const auto& node : index.clusters_at(static_cast<int>(zoom), bbox)) {
                nlohmann::ordered_json j;
                j["id"] = node.id;
                j["lon"] = node.lon;
                j["lat"] = node.lat;
                j["count"] = node.count;
                if (node.count == 1) j["point_id"] = node.member_ids.front();
                out.push_back(std::move(j));
            }
            return Response{200, "application/json", out.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)};
        });
    }

    Response handle_table(const std::string& dataset_id, const Params& params) const
    {
        return guarded([&] {
            const auto q = TableQuery::from_params(dataset_id, params);
            const auto& ds = dataset(q.dataset);
            const auto rows = table_matches(q);
            nlohmann::ordered_json page = nlohmann::ordered_json::array();
            const std::size_t first = std::min(rows.size(), q.page * q.page_size);
            const std::size_t last = std::min(rows.size(), first + q.page_size);
            for (std::size_t i = first; i < last; ++i) page.push_back(record_json(ds, rows[i]));
            nlohmann::ordered_json j;
            j["total_matching"] = rows.size();
            j["page"] = q.page;
            j["page_size"] = q.page_size;
            j["rows"] = std::move(page);
            return Response{200, "application/json", j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)};
        });
    }

    Response handle_export(const std::string& dataset_id, const Params& params) const
    {
        return guarded([&] {
            const auto q = TableQuery::from_params(dataset_id, params);
            const auto& ds = dataset(q.dataset);
            std::string out;
            std::vector<std::string> header{"GEOID"};
            header.insert(header.end(), ds.metrics.begin(), ds.metrics.end());
            tabular::append_csv_row(out, header);
            for (const auto& r : table_matches(q)) {
                std::vector<std::string> cells{*r.first};
                for (const auto& v : *r.second) cells.push_back(tabular::render_value(v));
                tabular::append_csv_row(out, cells);
            }
            return Response{200, "text/csv", std::move(out)};
        });
    }

    Response handle_search(const Params& params) const
    {
        return guarded([&] {
            auto q = param(params, "q").value_or("");
            const auto b = q.find_first_not_of(" \t");
            q = b == std::string::npos ? std::string() : q.substr(b, q.find_last_not_of(" \t") - b + 1);
            if (q.empty()) throw HttpError(400, "q is required");
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (const auto& g : search(q)) out.push_back({{"name", g.name}, {"lon", g.lon}, {"lat", g.lat}});
            return Response{200, "application/json", out.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)};
        });
    }

    Response handle_state_decode(const Params& params) const
    {
        return guarded([&] {
            const auto token = param(params, "token");
            if (!token) throw HttpError(400, "token is required");
            try {
                const auto s = state::decode_state(*token);
                return json_response({{"valid", true}, {"state", state::state_to_json(s)}});
            } catch (const Error& e) {
                throw HttpError(400, e.what());
            }
        });
    }

private:
    template <class Fn>
    static Response guarded(Fn&& fn)
    {
        try {
            return fn();
        } catch (const HttpError& e) {
            return error_response(e.status(), e.what());
        }
    }

    void require_new(const std::string& id) const
    {
        if (id.empty()) throw DomainError("empty layer id");
        for (const auto& e : catalog_)
            if (e.id == id) throw DomainError("duplicate layer id " + id);
    }

    static std::vector<std::string> numeric_properties(const FeatureCollection& fc)
    {
        std::vector<std::string> names;
        for (const auto& f : fc.features)
            for (const auto& [name, v] : f.attributes)
                if (name != "GEOID" && std::holds_alternative<double>(v)
                    && std::find(names.begin(), names.end(), name) == names.end())
                    names.push_back(name);
        return names;
    }

    static cluster::ClusterIndex build_cluster_index(const FeatureCollection& fc)
    {
        std::vector<cluster::SourcePoint> points;
        for (std::size_t i = 0; i < fc.features.size(); ++i) {
            const auto& f = fc.features[i];
            const std::string base = f.id.value_or(std::to_string(i));
            if (const auto* p = std::get_if<Point>(&f.geometry)) {
                points.push_back({base, p->coord.x, p->coord.y});
            } else if (const auto* mp = std::get_if<MultiPoint>(&f.geometry)) {
                for (std::size_t k = 0; k < mp->points.size(); ++k)
                    points.push_back({base + ":" + std::to_string(k), mp->points[k].x, mp->points[k].y});
            }
        }
        return cluster::ClusterIndex(std::move(points));
    }

    void add_gazetteer(LayerKind kind, const FeatureCollection& fc)
    {
        if (kind != LayerKind::census_map && kind != LayerKind::point) return;
        for (const auto& f : fc.features) {
            auto name = detail::feature_name(f);
            if (!name && kind == LayerKind::census_map)
                if (const auto* g = f.attributes.find("GEOID"))
                    if (const auto* s = std::get_if<std::string>(g)) name = *s;
            if (!name) continue;
            const auto c = bbox_of(f.geometry).center();
            gazetteer_.push_back({*name, c.x, c.y});
        }
    }

    std::vector<CatalogEntry> catalog_;
    std::map<std::string, VectorLayer> vectors_;
    std::map<std::string, raster::RasterPyramid> rasters_;
    std::map<std::string, cluster::ClusterIndex> clusters_;
    tabular::VulnerabilityStore store_;
    std::vector<GazetteerEntry> gazetteer_;
};

inline constexpr std::string_view kStoreFile = "vulnerability_store.json";
inline constexpr std::string_view kManifestFile = "catalog.json";

/// Kind of a GeoJSON layer when no manifest says otherwise: all points →
/// point layer; polygons carrying GEOID on every feature → census map;
/// anything else → hazard vector.
inline LayerKind infer_kind(const FeatureCollection& fc)
{
    if (fc.features.empty()) return LayerKind::hazard_vector;
    const bool points = std::all_of(fc.features.begin(), fc.features.end(), [](const Feature& f) {
        return std::holds_alternative<Point>(f.geometry) || std::holds_alternative<MultiPoint>(f.geometry);
    });
    if (points) return LayerKind::point;
    const bool census = std::all_of(fc.features.begin(), fc.features.end(), [](const Feature& f) {
        return f.attributes.contains("GEOID")
            && (std::holds_alternative<Polygon>(f.geometry) || std::holds_alternative<MultiPolygon>(f.geometry));
    });
    return census ? LayerKind::census_map : LayerKind::hazard_vector;
}

inline raster::RasterPyramid load_raster_file(const std::filesystem::path& path)
{
    const auto bytes = read_file_bytes(path.string());
    const auto ext = detail::lower(path.extension().string());
    if (ext == ".pyr") return raster::read_pyramid(bytes);
    return raster::build_overviews(raster::parse_geotiff(bytes), 32, raster::OverviewMethod::average);
}

/// Loads every processed layer under `dir`. With a catalog.json manifest
/// (`{"layers":[{"id","kind","file","label"?,"style"?}]}`) the manifest
/// decides ids, kinds and order; otherwise files are discovered by
/// extension in name order.
inline LayerService load_data_dir(const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("data directory " + dir.string() + " does not exist");
    LayerService service;

    const auto store_path = dir / kStoreFile;
    if (fs::exists(store_path)) service.set_store(tabular::parse_store(read_file_text(store_path.string())));

    const auto manifest_path = dir / kManifestFile;
    if (fs::exists(manifest_path)) {
        const auto manifest = nlohmann::json::parse(read_file_text(manifest_path.string()));
        for (const auto& item : manifest.at("layers")) {
            CatalogEntry e;
            e.id = item.at("id").get<std::string>();
            e.kind = parse_kind(item.at("kind").get<std::string>());
            e.label = item.value("label", e.id);
            if (item.contains("style")) e.style = item["style"];
            const auto file = dir / item.at("file").get<std::string>();
            if (e.kind == LayerKind::hazard_raster)
                service.add_raster_layer(std::move(e), load_raster_file(file));
            else
                service.add_vector_layer(std::move(e), geojson::read_geojson(read_file_text(file.string())));
        }
    } else {
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(dir))
            if (f.is_regular_file()) files.push_back(f.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            const auto ext = detail::lower(file.extension().string());
            CatalogEntry e;
            e.id = file.stem().string();
            e.label = e.id;
            if (ext == ".geojson") {
                auto fc = geojson::read_geojson(read_file_text(file.string()));
                e.kind = infer_kind(fc);
                service.add_vector_layer(std::move(e), std::move(fc));
            } else if (ext == ".pyr" || ext == ".tif" || ext == ".tiff") {
                service.add_raster_layer(std::move(e), load_raster_file(file));
            }
        }
    }
    service.link_census_metrics();
    return service;
}

} // namespace geovuln::server
