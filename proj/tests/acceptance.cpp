// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "geovuln/cluster.hpp"
#include "geovuln/geojson.hpp"
#include "geovuln/projection.hpp"
#include "geovuln/raster.hpp"
#include "geovuln/report.hpp"
#include "geovuln/shapefile.hpp"
#include "geovuln/simplify.hpp"
#include "geovuln/state.hpp"
#include "geovuln/tabular.hpp"

#include "generators.hpp"
#include "oracles.hpp"
#include "server_fixture.hpp"
#include "shapefile_writer.hpp"
#include "state_cases.hpp"
#include "table1.hpp"
#include "tiff_writer.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

using namespace geovuln;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects the first few failure messages; any failure fails the criterion.
class Check {
public:
    void expect(bool ok, const std::string& what)
    {
        if (ok) return;
        if (++failures_ <= 3) detail_ += (detail_.empty() ? "" : "; ") + what;
    }
    Outcome done(const std::string& summary) const
    {
        if (failures_ == 0) return {true, summary};
        return {false, std::to_string(failures_) + " violation(s): " + detail_};
    }

private:
    std::size_t failures_ = 0;
    std::string detail_;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Reduction formula against the published rows.
Outcome reduction_formula()
{
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    double worst = 0.0;
    for (const auto& r : fixture::kPublishedReductions) {
        const double got = reduction_row(std::string(r.layer), r.unfiltered, r.filtered).percent_removed;
        worst = std::max(worst, std::abs(got - r.percent));
        c.expect(std::abs(got - r.percent) <= 1e-6, std::string(r.layer) + " gives " + fmt("%.8f", got));
    }
    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 1.0, "runtime " + fmt("%.3f", elapsed) + " s");
    return c.done("11 rows, max |error| " + fmt("%.2e", worst) + " pp, " + fmt("%.4f", elapsed) + " s");
}

// 2. Dense coastline sweep reaches high reduction within the tolerance bound.
Outcome dense_coastline_sweep()
{
    const auto t0 = std::chrono::steady_clock::now();
    fixture::Rng rng(2024);
    const auto fc = fixture::dense_coastline(rng, 10, 12000);
    const std::vector<double> tols{1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3};
    const auto report = tolerance_sweep(fc, tols, 5);
    Check c;
    c.expect(report.vertex_count_before >= 100000, "only " + std::to_string(report.vertex_count_before) + " vertices");
    bool reached = false;
    std::string best;
    for (const auto& row : report.rows) {
        c.expect(row.max_deviation_observed <= row.tolerance,
                 "deviation " + fmt("%.3g", row.max_deviation_observed) + " > tol " + fmt("%.3g", row.tolerance));
        const double removed = percent_removed(report.vertex_count_before, row.vertex_count_after);
        if (!reached && removed >= 90.0 && row.max_deviation_observed <= row.tolerance) {
            reached = true;
            best = fmt("%.2f", removed) + "% removed at tol " + fmt("%g", row.tolerance) + " (max dev "
                + fmt("%.3g", row.max_deviation_observed) + ")";
        }
    }
    c.expect(reached, "no tolerance reached 90% removal");
    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 30.0, "runtime " + fmt("%.1f", elapsed) + " s");
    return c.done(std::to_string(report.vertex_count_before) + " vertices, " + best + ", " + fmt("%.2f", elapsed) + " s");
}

// 3. Every original vertex lies within tolerance of the simplified line.
Outcome simplification_bound()
{
    fixture::Rng rng(3);
    Check c;
    std::size_t checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto n = static_cast<std::size_t>(fixture::uniform_int(rng, 2, 400));
        const auto line = fixture::random_polyline(rng, n, fixture::uniform(rng, -160, -155), fixture::uniform(rng, 19, 22),
                                                   fixture::uniform(rng, 1e-4, 1e-2));
        const double tol = fixture::uniform(rng, 0.0, 0.05);
        const auto simplified = simplify_polyline(line, tol);
        c.expect(simplified.front() == line.front() && simplified.back() == line.back(), "endpoints moved");
        for (const auto& p : line) {
            const double d = oracle::point_polyline_distance(p, simplified);
            c.expect(d <= tol, "distance " + fmt("%.3g", d) + " > tol " + fmt("%.3g", tol));
            ++checked;
        }
    }
    return c.done("1000 polylines, " + std::to_string(checked) + " vertices, 0 violations");
}

// 4. Projection round trips and the zone 4N anchor point.
Outcome projection_round_trips()
{
    fixture::Rng rng(4);
    const auto utm = projection::ProjectionSpec::utm_zone_4n();
    Check c;
    double merc_worst = 0.0, utm_worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double lon = fixture::uniform(rng, -180, 180);
        const double lat = fixture::uniform(rng, -85, 85);
        const auto m = projection::geographic_to_mercator(lon, lat);
        const auto back = projection::mercator_to_geographic(m.x, m.y);
        merc_worst = std::max({merc_worst, std::abs(back.x - lon), std::abs(back.y - lat)});

        const double ulon = fixture::uniform(rng, -162, -156); // zone 4 band
        const double ulat = fixture::uniform(rng, 0, 84);
        const auto en = projection::geographic_to_utm(ulon, ulat, utm);
        const auto g = projection::utm_to_geographic(en.x, en.y, utm);
        const auto en2 = projection::geographic_to_utm(g.x, g.y, utm);
        utm_worst = std::max(utm_worst, std::hypot(en2.x - en.x, en2.y - en.y));
    }
    c.expect(merc_worst <= 1e-9, "Mercator round trip error " + fmt("%.3g", merc_worst) + " deg");
    c.expect(utm_worst <= 1e-3, "UTM round trip error " + fmt("%.3g", utm_worst) + " m");

    for (const auto& r : oracle::kUtmReference) {
        const auto en = projection::geographic_to_utm(r.lon, r.lat, utm);
        c.expect(std::hypot(en.x - r.easting, en.y - r.northing) <= 1e-3,
                 "UTM forward differs from reference at (" + fmt("%g", r.lon) + ", " + fmt("%g", r.lat) + ")");
    }
    const auto origin = projection::utm_to_geographic(500000.0, 0.0, utm);
    c.expect(std::abs(origin.x + 159.0) <= 1e-9 && std::abs(origin.y) <= 1e-9, "(500000,0) does not map to (-159,0)");
    const auto anchor = projection::geographic_to_utm(-159.0, 0.0, utm);
    c.expect(std::abs(anchor.x - 500000.0) <= 1e-9 && std::abs(anchor.y) <= 1e-9, "(-159,0) does not map to (500000,0)");
    return c.done("10000 points, Mercator max " + fmt("%.2e", merc_worst) + " deg, UTM max " + fmt("%.2e", utm_worst)
                  + " m, anchor exact");
}

// 5. Shapefile round trip and fuzzing.
Outcome shapefile_round_trip_and_fuzz()
{
    fixture::Rng rng(5);
    Check c;
    const fixture::Family families[] = {fixture::Family::points, fixture::Family::multipoints, fixture::Family::lines,
                                        fixture::Family::polygons};
    const std::int32_t types[] = {1, 8, 3, 5};
    std::vector<fixture::ShapefileBytes> seeds;
    for (int i = 0; i < 50; ++i) {
        const auto k = static_cast<std::size_t>(i % 4);
        const auto fc = fixture::random_collection(rng, families[k], static_cast<std::size_t>(fixture::uniform_int(rng, 0, 40)));
        const auto bytes = fixture::write_shapefile(fc, types[k]);
        try {
            const auto records = shapefile::parse_shp(bytes.shp);
            c.expect(shapefile::parse_shx(bytes.shx).records.size() == records.size(), "index count differs");
            const auto got = shapefile::assemble(records, shapefile::parse_dbf(bytes.dbf), kEpsgWgs84).collection;
            c.expect(got == fc, "collection " + std::to_string(i) + " differs after round trip");
        } catch (const std::exception& e) {
            c.expect(false, "collection " + std::to_string(i) + " threw " + e.what());
        }
        seeds.push_back(bytes);
    }

    std::size_t structured = 0, parsed = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto& seed = seeds[static_cast<std::size_t>(fixture::uniform_int(rng, 0, 49))];
        const int which = i % 3;
        auto bytes = which == 0 ? seed.shp : which == 1 ? seed.shx : seed.dbf;
        const int mode = fixture::uniform_int(rng, 0, 3);
        if (mode == 3 || bytes.empty()) {
            bytes.resize(static_cast<std::size_t>(fixture::uniform_int(rng, 0, 200)));
            for (auto& b : bytes) b = static_cast<std::uint8_t>(fixture::uniform_int(rng, 0, 255));
        } else {
            for (int f = fixture::uniform_int(rng, 1, 16); f > 0; --f)
                bytes[static_cast<std::size_t>(fixture::uniform_int(rng, 0, static_cast<int>(bytes.size()) - 1))] =
                    static_cast<std::uint8_t>(fixture::uniform_int(rng, 0, 255));
            if (mode == 1) bytes.resize(static_cast<std::size_t>(fixture::uniform_int(rng, 0, static_cast<int>(bytes.size()))));
        }
        try {
            if (which == 0) {
                const auto records = shapefile::parse_shp(bytes);
                shapefile::assemble(records, shapefile::parse_dbf(seed.dbf), kEpsgWgs84);
            } else if (which == 1) {
                shapefile::parse_shx(bytes);
            } else {
                shapefile::parse_dbf(bytes);
            }
            ++parsed;
        } catch (const Error&) {
            ++structured;
        } catch (const std::exception& e) {
            c.expect(false, std::string("unstructured exception: ") + e.what());
        }
    }
    return c.done("50 collections bit-exact; 10000 fuzz cases: " + std::to_string(structured) + " structured errors, "
                  + std::to_string(parsed) + " parsed, 0 crashes");
}

// 6. GeoJSON precision round trip and size.
Outcome geojson_precision()
{
    fixture::Rng rng(6);
    Check c;
    std::size_t fixtures = 0;
    for (auto family : {fixture::Family::points, fixture::Family::multipoints, fixture::Family::lines, fixture::Family::polygons}) {
        for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{10}, std::size_t{60}}) {
            const auto fc = fixture::random_collection(rng, family, n);
            ++fixtures;
            c.expect(geojson::read_geojson(geojson::write_geojson(fc, {5})) == quantize(fc, 5),
                     "read(write(fc,5)) != quantize(fc,5) for fixture " + std::to_string(fixtures));
            if (!fc.features.empty())
                c.expect(geojson::write_geojson(fc, {5}).size() < geojson::write_geojson(fc, {15}).size(),
                         "5dp not smaller for fixture " + std::to_string(fixtures));
        }
    }
    const auto coast = fixture::dense_coastline(rng, 2, 2000);
    ++fixtures;
    c.expect(geojson::read_geojson(geojson::write_geojson(coast, {5})) == quantize(coast, 5), "coastline round trip");
    c.expect(geojson::write_geojson(coast, {5}).size() < geojson::write_geojson(coast, {15}).size(), "coastline size");
    return c.done(std::to_string(fixtures) + " fixtures, round trip = quantize, 5dp < 15dp on every nonempty fixture");
}

// 7. Raster parse, overview mean conservation and level selection.
Outcome raster_pipeline()
{
    fixture::Rng rng(7);
    Check c;
    auto grid = [&](std::size_t w, std::size_t h, bool nodata) {
        raster::RasterGrid g;
        g.width = w;
        g.height = h;
        g.transform = {-158.3, 21.75, 0.001, -0.001};
        g.crs = kEpsgWgs84;
        if (nodata) g.nodata = -9999.0;
        for (std::size_t i = 0; i < w * h; ++i)
            g.values.push_back(nodata && fixture::coin(rng, 0.1) ? -9999.0 : fixture::uniform(rng, -10, 10));
        return g;
    };
    int parsed = 0;
    for (int i = 0; i < 20; ++i) {
        const auto g = grid(static_cast<std::size_t>(fixture::uniform_int(rng, 1, 50)),
                            static_cast<std::size_t>(fixture::uniform_int(rng, 1, 50)), fixture::coin(rng));
        for (auto order : {std::endian::little, std::endian::big}) {
            fixture::TiffOptions o;
            o.order = order;
            o.rows_per_strip = static_cast<std::size_t>(fixture::uniform_int(rng, 0, 7));
            c.expect(raster::parse_geotiff(fixture::write_geotiff(g, o)) == g, "GeoTIFF round trip differs");
            ++parsed;
        }
    }
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto g = grid(2 * static_cast<std::size_t>(fixture::uniform_int(rng, 1, 64)),
                            2 * static_cast<std::size_t>(fixture::uniform_int(rng, 1, 64)), false);
        const auto d = raster::downsample(g, raster::OverviewMethod::average);
        const double m0 = std::accumulate(g.values.begin(), g.values.end(), 0.0) / static_cast<double>(g.values.size());
        const double m1 = std::accumulate(d.values.begin(), d.values.end(), 0.0) / static_cast<double>(d.values.size());
        worst = std::max(worst, std::abs(m0 - m1));
    }
    c.expect(worst <= 1e-9, "mean drift " + fmt("%.3g", worst));
    for (std::size_t w : {std::size_t{64}, std::size_t{256}, std::size_t{1000}}) {
        const auto g = grid(w, w / 2, false);
        const auto p = raster::build_overviews(g, 32, raster::OverviewMethod::average);
        const auto win = raster::read_window(p, g.extent(), w / 2);
        c.expect(win.level_used == 1, "width " + std::to_string(w) + " selected level " + std::to_string(win.level_used));
    }
    return c.done(std::to_string(parsed) + " GeoTIFFs bit-exact (LE+BE), mean drift " + fmt("%.2e", worst)
                  + ", max_px=width/2 selects level 1");
}

// 8. Cluster conservation and monotonicity.
Outcome clustering_conservation()
{
    fixture::Rng rng(8);
    Check c;
    for (std::size_t n : {std::size_t{10}, std::size_t{1000}, std::size_t{10000}}) {
        std::vector<cluster::SourcePoint> pts;
        for (std::size_t i = 0; i < n; ++i)
            pts.push_back({std::to_string(i), fixture::uniform(rng, -160.5, -154.5), fixture::uniform(rng, 18.8, 22.3)});
        // Some exact duplicates exercise the coincident-point rule.
        for (std::size_t i = 0; i < n / 20; ++i) pts[i + n / 2] = {pts[i + n / 2].id, pts[i].lon, pts[i].lat};
        const cluster::ClusterIndex index(pts);
        std::size_t previous = 0;
        for (int z = 0; z <= 16; ++z) {
            const auto nodes = index.clusters_at(z, BBox::world());
            std::size_t total = 0;
            for (const auto& node : nodes) total += node.count;
            c.expect(total == n, "N=" + std::to_string(n) + " zoom " + std::to_string(z) + " sums to " + std::to_string(total));
            c.expect(nodes.size() >= previous, "N=" + std::to_string(n) + " count drops at zoom " + std::to_string(z));
            previous = nodes.size();
        }
    }
    return c.done("N=10/1000/10000, zooms 0..16 conserve N, counts non-decreasing");
}

// 9. Unpivot triple multiset and store identity.
Outcome tabular_pipeline()
{
    fixture::Rng rng(9);
    Check c;
    using Triple = std::tuple<std::string, std::string, std::string>; // (id, base, value)
    auto cell = [](const Value& v) { return is_null(v) ? std::string("<null>") : tabular::render_value(v); };
    for (int i = 0; i < 500; ++i) {
        const auto t = fixture::random_double_header_table(rng);
        const auto u = tabular::unpivot_double_headers(t, {"GEOID"});

        // Brute force: every (row, base_token column) cell is one triple; a
        // token missing from a family contributes a null.
        std::map<std::string, std::set<std::string>> families;
        std::set<std::string> tokens;
        for (const auto& col : t.columns) {
            const auto us = col.rfind('_');
            if (col == "GEOID" || us == std::string::npos) continue;
            families[col.substr(0, us)].insert(col.substr(us + 1));
            tokens.insert(col.substr(us + 1));
        }
        std::vector<Triple> want;
        for (const auto& row : t.rows)
            for (const auto& [base, members] : families)
                for (const auto& token : tokens) {
                    const auto idx = t.column_index(base + "_" + token);
                    want.emplace_back(cell(row[*t.column_index("GEOID")]), base, idx ? cell(row[*idx]) : "<null>");
                }
        std::vector<Triple> got;
        for (const auto& row : u.rows)
            for (const auto& [base, members] : families)
                got.emplace_back(cell(row[*u.column_index("GEOID")]), base, cell(row[*u.column_index(base)]));
        std::sort(want.begin(), want.end());
        std::sort(got.begin(), got.end());
        c.expect(got == want, "table " + std::to_string(i) + " triple multiset differs");
    }
    for (int i = 0; i < 50; ++i) {
        std::map<std::string, tabular::Table> tables;
        for (int d = fixture::uniform_int(rng, 0, 3); d > 0; --d) {
            auto t = fixture::random_double_header_table(rng);
            tables.emplace("d" + std::to_string(d), tabular::unpivot_double_headers(t, {"GEOID"}));
        }
        const auto store = tabular::consolidate(tables).store;
        c.expect(tabular::parse_store(tabular::serialize_store(store)) == store, "consolidated store round trip differs");
        const auto random = fixture::random_store(rng, 3, 25);
        c.expect(tabular::parse_store(tabular::serialize_store(random)) == random, "random store round trip differs");
    }
    return c.done("500 tables preserve (id, base, value) multiset; 100 stores parse(serialize) = identity");
}

// 10. Server queries against linear-scan oracles.
Outcome server_oracles()
{
    const auto fx = fixture::make_server_fixture(10, 200);
    const auto& s = fx.service;
    fixture::Rng rng(10);
    Check c;
    for (int i = 0; i < 100; ++i) {
        const auto box = fixture::random_query_box(rng);
        for (const auto& [id, fc] : {std::pair{"tracts", &fx.tracts}, std::pair{"flood", &fx.hazards}}) {
            const auto got = s.layer_features(id, box);
            std::vector<Feature> want;
            for (auto k : fixture::bbox_oracle(*fc, box)) want.push_back(fc->features[k]);
            c.expect(got.features == want, std::string(id) + " bbox query " + std::to_string(i) + " differs");
        }
    }
    const auto& ds = s.dataset("tracts");
    for (int i = 0; i < 100; ++i) {
        const auto q = fixture::random_table_query(rng, ds);
        const auto want = fixture::table_oracle(ds, q);
        const auto page_size = static_cast<std::size_t>(fixture::uniform_int(rng, 1, 75));
        std::vector<std::string> got;
        std::size_t total = 0;
        for (std::size_t page = 0;; ++page) {
            const auto j = nlohmann::json::parse(s.handle_table("tracts", fixture::to_params(q, page, page_size)).body);
            total = j.at("total_matching").get<std::size_t>();
            if (j.at("rows").empty()) break;
            for (const auto& row : j.at("rows")) got.push_back(row.at("GEOID"));
        }
        c.expect(total == want.size(), "table query " + std::to_string(i) + " total differs");
        c.expect(got == want, "table query " + std::to_string(i) + " rows differ");
        const auto exported = tabular::clean_csv(s.handle_export("tracts", fixture::to_params(q, 0, page_size)).body);
        c.expect(exported.rows.size() == total, "export " + std::to_string(i) + " has " + std::to_string(exported.rows.size())
                                                    + " rows, total_matching " + std::to_string(total));
    }
    return c.done("100 bbox queries x 2 layers and 100 table queries match oracles; export rows = total_matching");
}

// 11. State codec identity and rejection.
Outcome state_codec()
{
    fixture::Rng rng(11);
    Check c;
    for (int i = 0; i < 1000; ++i) {
        const auto st = fixture::random_state(rng);
        try {
            c.expect(state::decode_state(state::encode_state(st)) == st, "state " + std::to_string(i) + " not restored");
        } catch (const std::exception& e) {
            c.expect(false, "state " + std::to_string(i) + " threw " + e.what());
        }
    }
    const auto invalid = fixture::invalid_states();
    for (const auto& bad : invalid) {
        bool rejected = false;
        try {
            state::decode_state(fixture::token_for(bad.json));
        } catch (const Error&) {
            rejected = true;
        }
        c.expect(rejected, "accepted: " + bad.what);
    }
    for (const char* token : {"!!!", "", "%%%", "eyJ"}) {
        bool rejected = false;
        try {
            state::decode_state(token);
        } catch (const Error&) {
            rejected = true;
        }
        c.expect(rejected, std::string("accepted token ") + token);
    }
    return c.done("1000 states round trip; " + std::to_string(invalid.size() + 4) + " invalid inputs rejected; no dashboard");
}

} // namespace

int main()
{
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"reduction-formula", reduction_formula},
        {"dense-coastline-sweep", dense_coastline_sweep},
        {"simplification-bound", simplification_bound},
        {"projection-round-trips", projection_round_trips},
        {"shapefile-round-trip-fuzz", shapefile_round_trip_and_fuzz},
        {"geojson-precision", geojson_precision},
        {"raster-pyramid", raster_pipeline},
        {"cluster-conservation", clustering_conservation},
        {"tabular-unpivot-store", tabular_pipeline},
        {"server-oracles", server_oracles},
        {"state-codec", state_codec},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, run] : criteria) {
        ++index;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("uncaught exception: ") + e.what()};
        }
        std::printf("%s %2d %-26s %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
