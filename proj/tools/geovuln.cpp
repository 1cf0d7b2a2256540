// geovuln: pipeline and layer server entry point.
//
// Exit status: 0 success, 1 usage error, 2 data error. Diagnostics go to
// stderr; data and reports go to files or stdout.

#include "geovuln/bytes.hpp"
#include "geovuln/geojson.hpp"
#include "geovuln/http.hpp"
#include "geovuln/projection.hpp"
#include "geovuln/raster.hpp"
#include "geovuln/report.hpp"
#include "geovuln/server.hpp"
#include "geovuln/shapefile.hpp"
#include "geovuln/simplify.hpp"
#include "geovuln/tabular.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace geovuln;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct PipelineConfig {
    int crs = kEpsgWgs84;
    double tolerance = 0.0;
    int decimals = 5;
    std::vector<std::string> keep;
    std::vector<std::string> deny = tabular::default_deny_patterns();
    std::string overview_method = "average";
    std::string output_dir = ".";
};

PipelineConfig load_config(const std::string& path)
{
    const auto j = nlohmann::json::parse(read_file_text(path));
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    PipelineConfig c;
    c.crs = j.value("crs", c.crs);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.decimals = j.value("decimals", c.decimals);
    c.keep = j.value("keep", c.keep);
    c.deny = j.value("deny", c.deny);
    c.overview_method = j.value("overview_method", c.overview_method);
    c.output_dir = j.value("output_dir", c.output_dir);
    return c;
}

void check_config(const PipelineConfig& c)
{
    if (!(c.tolerance >= 0.0)) throw DomainError("tolerance must be >= 0");
    if (c.decimals < 0 || c.decimals > 15) throw DomainError("decimals must be within 0..15");
    projection::ProjectionSpec::from_epsg(c.crs);
    raster::parse_method(c.overview_method);
}

/// Config file first, then any flag the user actually passed.
struct ConfigFlags {
    std::string config_path;
    PipelineConfig flags;
    CLI::Option* crs = nullptr;
    CLI::Option* tolerance = nullptr;
    CLI::Option* decimals = nullptr;
    CLI::Option* keep = nullptr;
    CLI::Option* deny = nullptr;
    CLI::Option* method = nullptr;
    CLI::Option* output_dir = nullptr;

    void add_config(CLI::App* app) { app->add_option("--config", config_path, "JSON pipeline config"); }

    PipelineConfig resolve() const
    {
        PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
        auto given = [](const CLI::Option* o) { return o && o->count() > 0; };
        if (given(crs)) c.crs = flags.crs;
        if (given(tolerance)) c.tolerance = flags.tolerance;
        if (given(decimals)) c.decimals = flags.decimals;
        if (given(keep)) c.keep = flags.keep;
        if (given(deny)) c.deny = flags.deny;
        if (given(method)) c.overview_method = flags.overview_method;
        if (given(output_dir)) c.output_dir = flags.output_dir;
        check_config(c);
        return c;
    }
};

FeatureCollection read_vector(const std::string& path, int crs)
{
    std::string ext = fs::path(path).extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".geojson" || ext == ".json") {
        auto fc = geojson::read_geojson(read_file_text(path));
        fc.crs = crs;
        return fc;
    }
    auto result = shapefile::read_shapefile(path, crs);
    if (result.null_geometries)
        std::cerr << "warning: " << result.null_geometries << " null geometries dropped from " << path << '\n';
    return std::move(result.collection);
}

fs::path output_path(const std::string& out, const PipelineConfig& c, const fs::path& input, const char* ext)
{
    if (!out.empty()) return out;
    return fs::path(c.output_dir) / input.filename().replace_extension(ext);
}

int run_convert(const std::string& in, const std::string& out, std::string name, const PipelineConfig& c)
{
    auto fc = projection::reproject_collection(read_vector(in, c.crs), kEpsgWgs84);
    if (!c.keep.empty()) fc = prune_attributes(fc, c.keep);
    const std::size_t before = vertex_count(fc);
    std::size_t warnings = 0;
    const auto result = quantize(simplify_collection(fc, c.tolerance), c.decimals, &warnings);
    if (warnings) std::cerr << "warning: " << warnings << " paths kept unquantized to stay valid\n";

    const auto path = output_path(out, c, in, ".geojson");
    write_file(path.string(), geojson::write_geojson(result, {c.decimals}));
    if (name.empty()) name = fs::path(in).stem().string();
    const std::vector<ReductionRow> rows{reduction_row(name, before, vertex_count(result))};
    std::cout << format_reduction_table(rows);
    return 0;
}

std::vector<double> parse_tolerances(const std::vector<std::string>& items)
{
    std::vector<double> out;
    for (const auto& item : items) {
        std::size_t start = 0;
        while (start <= item.size()) {
            const auto comma = std::min(item.find(',', start), item.size());
            const std::string_view part(item.data() + start, comma - start);
            double v = 0;
            const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
            if (part.empty() || res.ec != std::errc{} || res.ptr != part.data() + part.size())
                throw CLI::ValidationError("--tol", "bad tolerance '" + std::string(part) + "'");
            out.push_back(v);
            start = comma + 1;
        }
    }
    return out;
}

int run_sweep(const std::string& in, const std::string& out, const std::vector<double>& tolerances,
              const PipelineConfig& c)
{
    const auto fc = projection::reproject_collection(read_vector(in, c.crs), kEpsgWgs84);
    const auto report = tolerance_sweep(fc, tolerances, c.decimals);
    std::cerr << "vertices before: " << report.vertex_count_before << '\n';
    const auto csv = format_sweep_csv(report);
    if (out.empty())
        std::cout << csv;
    else
        write_file(out, csv);
    return 0;
}

int run_csv(const std::vector<std::string>& inputs, const std::string& out, const std::vector<std::string>& id_columns,
            const PipelineConfig& c)
{
    std::map<std::string, tabular::Table> tables;
    for (const auto& in : inputs) {
        const auto id = fs::path(in).stem().string();
        auto t = tabular::clean_csv(read_file_text(in));
        t = tabular::drop_statistical_columns(t, c.deny);
        t = tabular::unpivot_double_headers(t, id_columns);
        for (auto& [key, part] : tabular::split_by_group(t, id))
            if (!tables.emplace(key, std::move(part)).second) throw DomainError("duplicate dataset " + key);
    }
    const auto result = tabular::consolidate(tables);
    if (result.duplicate_warnings)
        std::cerr << "warning: " << result.duplicate_warnings << " duplicate GEOID rows (last kept)\n";
    const fs::path path = out.empty() ? fs::path(c.output_dir) / server::kStoreFile : fs::path(out);
    write_file(path.string(), tabular::serialize_store(result.store));
    for (const auto& [id, ds] : result.store.datasets)
        std::cout << id << ": " << ds.records.size() << " records, " << ds.metrics.size() << " metrics\n";
    return 0;
}

int run_raster(const std::string& in, const std::string& out, int levels, const PipelineConfig& c)
{
    const auto grid = raster::parse_geotiff(read_file_bytes(in));
    const auto pyramid = raster::build_overviews(grid, levels, raster::parse_method(c.overview_method));
    write_file(output_path(out, c, in, ".pyr").string(), raster::write_pyramid(pyramid));
    for (std::size_t i = 0; i < pyramid.levels.size(); ++i)
        std::cout << "level " << i << ": " << pyramid.levels[i].width << "x" << pyramid.levels[i].height << '\n';
    return 0;
}

std::optional<std::size_t> parse_count(std::string_view s)
{
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// `name:before:after`, where before/after are vertex counts or GeoJSON files.
ReductionRow report_row(const std::string& spec)
{
    const auto first = spec.find(':');
    const auto last = spec.rfind(':');
    if (first == std::string::npos || first == last)
        throw CLI::ValidationError("LAYER", "expected name:before:after, got '" + spec + "'");
    const auto name = spec.substr(0, first);
    const auto a = spec.substr(first + 1, last - first - 1);
    const auto b = spec.substr(last + 1);
    auto count = [](const std::string& part) {
        if (auto n = parse_count(part)) return *n;
        return vertex_count(geojson::read_geojson(read_file_text(part)));
    };
    return reduction_row(name, count(a), count(b));
}

int run_report(const std::vector<std::string>& specs, bool csv)
{
    std::vector<ReductionRow> rows;
    for (const auto& s : specs) rows.push_back(report_row(s));
    std::cout << (csv ? format_reduction_csv(rows) : format_reduction_table(rows));
    return 0;
}

int run_serve(std::string data_dir, int port, const std::string& host, const std::string& static_dir)
{
    const auto service = server::load_data_dir(data_dir);
    httplib::Server http;
    server::mount_routes(http, service);
    if (!static_dir.empty() && !http.set_mount_point("/", static_dir))
        throw Error("static directory " + static_dir + " does not exist");
    std::cerr << "serving " << service.catalog().size() << " layers from " << data_dir << " on " << host << ':' << port
              << '\n';
    if (!http.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    return 0;
}

std::string env_or(const char* name, std::string fallback)
{
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hazard and vulnerability layer pipeline and server", "geovuln"};
    app.require_subcommand(1);

    // convert
    auto* convert = app.add_subcommand("convert", "Shapefile to simplified GeoJSON with a reduction report");
    ConfigFlags convert_cfg;
    std::string convert_in, convert_out, convert_name;
    convert->add_option("--in", convert_in, "Input .shp (or .geojson)")->required()->check(CLI::ExistingFile);
    convert->add_option("--out", convert_out, "Output GeoJSON (default <output_dir>/<stem>.geojson)");
    convert->add_option("--name", convert_name, "Layer name in the report (default input stem)");
    convert_cfg.crs = convert->add_option("--crs", convert_cfg.flags.crs, "Source EPSG code (4326, 3857, 3750)");
    convert_cfg.tolerance = convert->add_option("--tol", convert_cfg.flags.tolerance, "Simplification tolerance, degrees");
    convert_cfg.decimals = convert->add_option("--decimals", convert_cfg.flags.decimals, "Coordinate decimals");
    convert_cfg.keep = convert->add_option("--keep", convert_cfg.flags.keep, "Attributes to keep")->delimiter(',');
    convert_cfg.output_dir = convert->add_option("--output-dir", convert_cfg.flags.output_dir, "Output directory");
    convert_cfg.add_config(convert);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Tolerance sweep report (CSV)");
    ConfigFlags sweep_cfg;
    std::string sweep_in, sweep_out;
    std::vector<std::string> sweep_tols;
    sweep->add_option("--in", sweep_in, "Input .shp (or .geojson)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_out, "Output CSV (default stdout)");
    sweep->add_option("--tol", sweep_tols, "Tolerances, ascending (comma separated or repeated)")->required();
    sweep_cfg.crs = sweep->add_option("--crs", sweep_cfg.flags.crs, "Source EPSG code");
    sweep_cfg.decimals = sweep->add_option("--decimals", sweep_cfg.flags.decimals, "Coordinate decimals for size");
    sweep_cfg.add_config(sweep);

    // csv
    auto* csv = app.add_subcommand("csv", "Clean, unpivot and consolidate census CSVs into a store");
    ConfigFlags csv_cfg;
    std::vector<std::string> csv_inputs;
    std::string csv_out;
    std::vector<std::string> id_columns{"GEOID"};
    csv->add_option("inputs", csv_inputs, "CSV files (dataset id = file stem)")->required()->check(CLI::ExistingFile);
    csv->add_option("--out", csv_out, "Store file (default <output_dir>/vulnerability_store.json)");
    csv->add_option("--id-columns", id_columns, "Identifier columns kept through unpivot")->delimiter(',');
    csv_cfg.deny = csv->add_option("--deny", csv_cfg.flags.deny, "Column patterns to drop")->delimiter(',');
    csv_cfg.output_dir = csv->add_option("--output-dir", csv_cfg.flags.output_dir, "Output directory");
    csv_cfg.add_config(csv);

    // raster
    auto* rast = app.add_subcommand("raster", "GeoTIFF to overview pyramid file");
    ConfigFlags raster_cfg;
    std::string raster_in, raster_out;
    int raster_levels = 32;
    rast->add_option("--in", raster_in, "Input GeoTIFF")->required()->check(CLI::ExistingFile);
    rast->add_option("--out", raster_out, "Output pyramid (default <output_dir>/<stem>.pyr)");
    rast->add_option("--levels", raster_levels, "Maximum pyramid levels")->check(CLI::Range(1, 64));
    raster_cfg.method =
        rast->add_option("--method", raster_cfg.flags.overview_method, "Overview method")->check(CLI::IsMember({"average", "nearest"}));
    raster_cfg.output_dir = rast->add_option("--output-dir", raster_cfg.flags.output_dir, "Output directory");
    raster_cfg.add_config(rast);

    // report
    auto* report = app.add_subcommand("report", "Vertex reduction table across layers");
    std::vector<std::string> report_specs;
    bool report_csv = false;
    report->add_option("layers", report_specs, "name:before:after (vertex counts or GeoJSON files)")->required();
    report->add_flag("--csv", report_csv, "CSV instead of an aligned table");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve processed layers over HTTP");
    std::string data_dir, host = "0.0.0.0", static_dir;
    std::optional<int> port;
    serve->add_option("--data-dir", data_dir, "Processed layer directory (env GEOVULN_DATA_DIR)");
    serve->add_option("--port", port, "Port (env GEOVULN_PORT, default 8080)")->check(CLI::Range(1, 65535));
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--static-dir", static_dir, "Dashboard assets served under /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*convert) return run_convert(convert_in, convert_out, convert_name, convert_cfg.resolve());
        if (*sweep) return run_sweep(sweep_in, sweep_out, parse_tolerances(sweep_tols), sweep_cfg.resolve());
        if (*csv) return run_csv(csv_inputs, csv_out, id_columns, csv_cfg.resolve());
        if (*rast) return run_raster(raster_in, raster_out, raster_levels, raster_cfg.resolve());
        if (*report) return run_report(report_specs, report_csv);
        if (*serve) {
            if (data_dir.empty()) data_dir = env_or("GEOVULN_DATA_DIR", "");
            if (data_dir.empty()) {
                std::cerr << "error: --data-dir or GEOVULN_DATA_DIR is required\n\n" << serve->help();
                return kExitUsage;
            }
            int p = 8080;
            if (port) {
                p = *port;
            } else if (const auto env = env_or("GEOVULN_PORT", ""); !env.empty()) {
                const auto v = parse_count(env);
                if (!v || *v < 1 || *v > 65535) {
                    std::cerr << "error: GEOVULN_PORT must be a port number\n";
                    return kExitUsage;
                }
                p = static_cast<int>(*v);
            }
            return run_serve(data_dir, p, host, static_dir);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
