#include "geovuln/server.hpp"

#include "server_fixture.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace geovuln;
using namespace geovuln::server;
using nlohmann::json;

namespace {

const fixture::ServerFixture& shared()
{
    static const auto fx = fixture::make_server_fixture(42);
    return fx;
}

json body_of(const Response& r) { return json::parse(r.body); }

} // namespace

TEST(Catalog, ListsEveryLayerWithTabAndBbox)
{
    const auto j = body_of(shared().service.handle_catalog());
    const auto& layers = j.at("layers");
    ASSERT_EQ(layers.size(), 4u);
    EXPECT_EQ(layers[0].at("id"), "tracts");
    EXPECT_EQ(layers[0].at("kind"), "census_map");
    EXPECT_EQ(layers[0].at("tab"), "Maps");
    EXPECT_EQ(layers[0].at("metrics"), json({"POP", "RATE", "LABEL", "URBAN"}));
    EXPECT_EQ(layers[1].at("tab"), "Hazards");
    EXPECT_EQ(layers[2].at("tab"), "Points");
    EXPECT_EQ(layers[3].at("tab"), "Rasters");
    EXPECT_EQ(layers[3].at("bbox"), json({-158.3, 21.75 - 0.005 * 64, -158.3 + 0.005 * 96, 21.75}));
    for (const auto& l : layers) EXPECT_EQ(l.at("bbox").size(), 4u);
}

TEST(Catalog, CensusMetricsFallBackToNumericProperties)
{
    LayerService s;
    fixture::Rng rng(1);
    s.add_vector_layer({"t", LayerKind::census_map, "T", std::nullopt, {}, json::object()}, fixture::census_tracts(rng, 3));
    EXPECT_EQ(s.catalog()[0].metrics, (std::vector<std::string>{"POP"}));
}

TEST(Catalog, RegistrationErrors)
{
    LayerService s;
    FeatureCollection utm;
    utm.crs = kEpsgUtm4N;
    EXPECT_THROW(s.add_vector_layer({"x", LayerKind::hazard_vector, "", std::nullopt, {}, json::object()}, utm), DomainError);
    s.add_vector_layer({"x", LayerKind::hazard_vector, "", std::nullopt, {}, json::object()}, {});
    EXPECT_THROW(s.add_vector_layer({"x", LayerKind::hazard_vector, "", std::nullopt, {}, json::object()}, {}), DomainError);
}

TEST(Layers, BboxQueryMatchesLinearScan)
{
    const auto& fx = shared();
    fixture::Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const auto box = fixture::random_query_box(rng);
        for (const auto& [id, fc] : {std::pair{"tracts", &fx.tracts}, std::pair{"flood", &fx.hazards}}) {
            const auto got = fx.service.layer_features(id, box);
            std::vector<Feature> want;
            for (auto k : fixture::bbox_oracle(*fc, box)) want.push_back(fc->features[k]);
            ASSERT_EQ(got.features, want) << id;
        }
    }
}

TEST(Layers, GeoJsonResponse)
{
    const auto& s = shared().service;
    const auto r = s.handle_layer("tracts", {{"bbox", "-180,-90,180,90"}});
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.content_type, "application/geo+json");
    EXPECT_EQ(geojson::read_geojson(r.body).features.size(), 200u);
    EXPECT_EQ(geojson::read_geojson(s.handle_layer("tracts", {{"bbox", "0,0,1,1"}}).body).features.size(), 0u);
    EXPECT_EQ(geojson::read_geojson(s.handle_layer("flood", {}).body).features.size(), 200u);
}

TEST(Layers, Errors)
{
    const auto& s = shared().service;
    EXPECT_EQ(s.handle_layer("nope", {}).status, 404);
    EXPECT_EQ(body_of(s.handle_layer("nope", {})).at("error"), "layer not found");
    for (const char* bad : {"1,2,3", "a,b,c,d", "1,2,3,4,5", "3,0,1,1", "", "1,,2,3", "nan,0,1,1"}) {
        const auto r = s.handle_layer("tracts", {{"bbox", bad}});
        EXPECT_EQ(r.status, 400) << bad;
        EXPECT_EQ(body_of(r).at("error"), "malformed bbox");
    }
    EXPECT_EQ(s.handle_layer("slr", {}).status, 400);
}

TEST(Raster, WindowSelectsLevelAndReportsShape)
{
    const auto& fx = shared();
    const auto full = body_of(fx.service.handle_raster_window("slr", {{"max_px", "96"}}));
    EXPECT_EQ(full.at("level_used"), 0);
    EXPECT_EQ(full.at("width"), 96);
    EXPECT_EQ(full.at("height"), 64);
    EXPECT_EQ(full.at("nodata"), -9999.0);
    EXPECT_EQ(full.at("values").size(), 96u * 64u);
    EXPECT_EQ(body_of(fx.service.handle_raster_window("slr", {{"max_px", "48"}})).at("level_used"), 1);
    EXPECT_EQ(body_of(fx.service.handle_raster_window("slr", {})).at("level_used"), 0);
}

TEST(Raster, Errors)
{
    const auto& s = shared().service;
    EXPECT_EQ(s.handle_raster_window("slr", {{"max_px", "0"}}).status, 400);
    EXPECT_EQ(s.handle_raster_window("slr", {{"max_px", "9000"}}).status, 400);
    EXPECT_EQ(s.handle_raster_window("slr", {{"max_px", "x"}}).status, 400);
    EXPECT_EQ(s.handle_raster_window("slr", {{"bbox", "0,0,1,1"}}).status, 400);
    EXPECT_EQ(s.handle_raster_window("tracts", {}).status, 400);
    EXPECT_EQ(s.handle_raster_window("none", {}).status, 404);
}

TEST(Clusters, CountsSumToPointTotal)
{
    const auto& s = shared().service;
    for (int z = 0; z <= 16; ++z) {
        const auto j = body_of(s.handle_clusters("shelters", {{"zoom", std::to_string(z)}}));
        std::size_t total = 0;
        for (const auto& c : j) {
            total += c.at("count").get<std::size_t>();
            EXPECT_EQ(c.contains("point_id"), c.at("count") == 1);
        }
        EXPECT_EQ(total, 300u);
    }
    const auto singles = body_of(s.handle_clusters("shelters", {{"zoom", "16"}}));
    EXPECT_EQ(singles[0].at("point_id").get<std::string>().front(), 's');
}

TEST(Clusters, Errors)
{
    const auto& s = shared().service;
    EXPECT_EQ(s.handle_clusters("shelters", {}).status, 400);
    EXPECT_EQ(s.handle_clusters("shelters", {{"zoom", "17"}}).status, 400);
    EXPECT_EQ(s.handle_clusters("shelters", {{"zoom", "-1"}}).status, 400);
    EXPECT_EQ(s.handle_clusters("tracts", {{"zoom", "3"}}).status, 400);
    EXPECT_EQ(s.handle_clusters("gone", {{"zoom", "3"}}).status, 404);
}

TEST(Table, MatchesOracleAcrossPages)
{
    const auto& s = shared().service;
    const auto& ds = s.dataset("tracts");
    fixture::Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        const auto q = fixture::random_table_query(rng, ds);
        const auto want = fixture::table_oracle(ds, q);
        const std::size_t page_size = static_cast<std::size_t>(fixture::uniform_int(rng, 1, 60));
        std::vector<std::string> got;
        for (std::size_t page = 0;; ++page) {
            const auto j = body_of(s.handle_table("tracts", fixture::to_params(q, page, page_size)));
            ASSERT_EQ(j.at("total_matching").get<std::size_t>(), want.size());
            EXPECT_LE(j.at("rows").size(), page_size);
            for (const auto& row : j.at("rows")) got.push_back(row.at("GEOID"));
            if (j.at("rows").empty()) break;
        }
        ASSERT_EQ(got, want);
    }
}

TEST(Table, RowShapeAndDefaults)
{
    const auto j = body_of(shared().service.handle_table("tracts", {}));
    EXPECT_EQ(j.at("page"), 0);
    EXPECT_EQ(j.at("page_size"), 50);
    EXPECT_EQ(j.at("total_matching"), 200);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.at("rows")[0].items()) keys.push_back(k);
    EXPECT_EQ(keys.size(), 5u);
    const auto past = body_of(shared().service.handle_table("tracts", {{"page", "99"}}));
    EXPECT_TRUE(past.at("rows").empty());
}

TEST(Table, Errors)
{
    const auto& s = shared().service;
    EXPECT_EQ(s.handle_table("missing", {}).status, 404);
    EXPECT_EQ(s.handle_table("tracts", {{"sort", "NOPE"}}).status, 400);
    EXPECT_EQ(s.handle_table("tracts", {{"dir", "up"}}).status, 400);
    EXPECT_EQ(s.handle_table("tracts", {{"page", "-1"}}).status, 400);
    EXPECT_EQ(s.handle_table("tracts", {{"page_size", "0"}}).status, 400);
    EXPECT_EQ(s.handle_table("tracts", {{"page_size", "1001"}}).status, 400);
    EXPECT_EQ(s.handle_table("tracts", {{"page", "1.5"}}).status, 400);
}

TEST(Export, RowCountEqualsTotalMatching)
{
    const auto& s = shared().service;
    const auto& ds = s.dataset("tracts");
    fixture::Rng rng(4);
    for (int i = 0; i < 30; ++i) {
        const auto q = fixture::random_table_query(rng, ds);
        const auto params = fixture::to_params(q, 0, 7);
        const auto r = s.handle_export("tracts", params);
        EXPECT_EQ(r.content_type, "text/csv");
        const auto table = tabular::clean_csv(r.body);
        EXPECT_EQ(table.columns, (std::vector<std::string>{"GEOID", "POP", "RATE", "LABEL", "URBAN"}));
        const auto total = body_of(s.handle_table("tracts", params)).at("total_matching").get<std::size_t>();
        ASSERT_EQ(table.rows.size(), total);
        const auto want = fixture::table_oracle(ds, q);
        for (std::size_t k = 0; k < want.size(); ++k) EXPECT_EQ(table.rows[k][0], Value{want[k]});
    }
}

TEST(Search, RanksExactThenPrefixThenSubstring)
{
    LayerService s;
    FeatureCollection pts;
    for (const char* name : {"Hilo Bay", "Old Hilo", "Hilo", "Kona", "hilo", "Hilo Airport"}) {
        Attributes a;
        a.set("name", std::string(name));
        pts.features.push_back({Point{{-155.0, 19.7}}, std::move(a), std::nullopt});
    }
    s.add_vector_layer({"p", LayerKind::point, "", std::nullopt, {}, json::object()}, pts);
    const auto j = body_of(s.handle_search({{"q", "  hilo "}}));
    std::vector<std::string> names;
    for (const auto& r : j) names.push_back(r.at("name"));
    EXPECT_EQ(names, (std::vector<std::string>{"Hilo", "hilo", "Hilo Airport", "Hilo Bay", "Old Hilo"}));
    EXPECT_EQ(j[0].at("lon"), -155.0);
}

TEST(Search, CapsAtTenAndRequiresQuery)
{
    const auto& s = shared().service;
    EXPECT_EQ(body_of(s.handle_search({{"q", "Tract"}})).size(), 10u);
    EXPECT_EQ(body_of(s.handle_search({{"q", "zzzzzzzz"}})).size(), 0u);
    EXPECT_EQ(s.handle_search({}).status, 400);
    EXPECT_EQ(s.handle_search({{"q", "   "}}).status, 400);
}

TEST(StateDecode, ValidAndInvalid)
{
    const auto& s = shared().service;
    const auto ok = body_of(s.handle_state_decode({{"token", state::encode_state(state::default_state())}}));
    EXPECT_EQ(ok.at("valid"), true);
    EXPECT_EQ(ok.at("state").at("version"), 1);
    EXPECT_EQ(s.handle_state_decode({{"token", "!!!"}}).status, 400);
    EXPECT_EQ(s.handle_state_decode({}).status, 400);
}

TEST(LoadDataDir, DiscoversFilesAndStore)
{
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "geovuln_server_load";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fixture::Rng rng(5);
    const auto tracts = fixture::census_tracts(rng, 5);
    write_file((dir / "tracts.geojson").string(), geojson::write_geojson(tracts));
    write_file((dir / "shelters.geojson").string(), geojson::write_geojson(fixture::shelters(rng, 4)));
    write_file((dir / "depth.pyr").string(),
               raster::write_pyramid(raster::build_overviews(fixture::depth_grid(rng, 8, 8), 32, raster::OverviewMethod::average)));
    tabular::VulnerabilityStore store;
    store.datasets.emplace("tracts", fixture::tract_dataset(rng, tracts));
    write_file((dir / std::string(kStoreFile)).string(), tabular::serialize_store(store));
    write_file((dir / "notes.txt").string(), "ignored");

    const auto s = load_data_dir(dir);
    ASSERT_EQ(s.catalog().size(), 3u);
    EXPECT_EQ(s.catalog()[0].id, "depth");
    EXPECT_EQ(s.catalog()[0].kind, LayerKind::hazard_raster);
    EXPECT_EQ(s.catalog()[1].kind, LayerKind::point);
    EXPECT_EQ(s.catalog()[2].kind, LayerKind::census_map);
    EXPECT_EQ(s.catalog()[2].metrics, (std::vector<std::string>{"POP", "RATE", "LABEL", "URBAN"}));
    EXPECT_EQ(s.store(), store);

    write_file((dir / std::string(kManifestFile)).string(),
               R"({"layers":[{"id":"shelters_v2","kind":"point","file":"shelters.geojson","label":"Shelters"},)"
               R"({"id":"slr","kind":"hazard_raster","file":"depth.pyr","style":{"ramp":"blues"}}]})");
    const auto m = load_data_dir(dir);
    ASSERT_EQ(m.catalog().size(), 2u);
    EXPECT_EQ(m.catalog()[0].id, "shelters_v2");
    EXPECT_EQ(m.catalog()[0].label, "Shelters");
    EXPECT_EQ(m.catalog()[1].style.at("ramp"), "blues");
    fs::remove_all(dir);
    EXPECT_THROW(load_data_dir(dir), Error);
}

TEST(InferKind, ByGeometryAndGeoid)
{
    fixture::Rng rng(6);
    EXPECT_EQ(infer_kind(fixture::census_tracts(rng, 2)), LayerKind::census_map);
    EXPECT_EQ(infer_kind(fixture::shelters(rng, 2)), LayerKind::point);
    FeatureCollection lines;
    lines.features.push_back({LineString{{{0, 0}, {1, 1}}}, {}, std::nullopt});
    EXPECT_EQ(infer_kind(lines), LayerKind::hazard_vector);
    EXPECT_EQ(infer_kind({}), LayerKind::hazard_vector);
}
