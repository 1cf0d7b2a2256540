#pragma once

// Tolerance sweep and vertex reduction reporting.

#include "geovuln/error.hpp"
#include "geovuln/geojson.hpp"
#include "geovuln/geometry.hpp"
#include "geovuln/simplify.hpp"

#include <algorithm>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace geovuln {

struct SweepRow {
    double tolerance = 0.0;
    std::size_t vertex_count_after = 0;
    std::size_t serialized_size_bytes = 0;
    double max_deviation_observed = 0.0;
};

struct SweepReport {
    std::size_t vertex_count_before = 0;
    std::vector<SweepRow> rows;
};

/// Simplifies every feature at each tolerance and measures vertex count,
/// GeoJSON size at `decimals` and the worst vertex deviation.
inline SweepReport tolerance_sweep(const FeatureCollection& fc, std::span<const double> tolerances, int decimals = 5)
{
    if (tolerances.empty()) throw DomainError("nothing to sweep");
    for (std::size_t i = 0; i < tolerances.size(); ++i) {
        if (!(tolerances[i] >= 0.0)) throw DomainError("tolerance must be >= 0");
        if (i && tolerances[i] < tolerances[i - 1]) throw DomainError("tolerances must be sorted ascending");
    }

    SweepReport report;
    report.vertex_count_before = vertex_count(fc);
    for (double tol : tolerances) {
        SweepRow row;
        row.tolerance = tol;
        FeatureCollection simplified{fc.crs, {}};
        simplified.features.reserve(fc.features.size());
        for (const auto& f : fc.features) {
            Geometry g = map_paths(f.geometry, [&](const Path& path, PathRole role) {
                auto s = simplify_path(path, role, tol);
                row.max_deviation_observed = std::max(row.max_deviation_observed, s.max_deviation);
                return std::move(s.path);
            });
            row.vertex_count_after += vertex_count(g);
            simplified.features.push_back({std::move(g), f.attributes, f.id});
        }
        row.serialized_size_bytes = geojson::write_geojson(simplified, {decimals}).size();
        report.rows.push_back(row);
    }
    return report;
}

inline std::string format_sweep_csv(const SweepReport& report)
{
    std::string out = "tolerance,vertex_count_after,serialized_size_bytes,max_deviation_observed\n";
    char buf[160];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%.10g,%zu,%zu,%.10g\n", r.tolerance, r.vertex_count_after,
                      r.serialized_size_bytes, r.max_deviation_observed);
        out += buf;
    }
    return out;
}

struct ReductionRow {
    std::string layer_name;
    std::size_t unfiltered = 0;
    std::size_t filtered = 0;
    double percent_removed = 0.0;
};

inline double percent_removed(std::size_t unfiltered, std::size_t filtered)
{
    if (unfiltered == 0) throw DomainError("empty layer");
    return 100.0 * (static_cast<double>(unfiltered) - static_cast<double>(filtered)) / static_cast<double>(unfiltered);
}

inline ReductionRow reduction_row(std::string layer_name, std::size_t unfiltered, std::size_t filtered)
{
    return {std::move(layer_name), unfiltered, filtered, percent_removed(unfiltered, filtered)};
}

inline ReductionRow reduction_report(std::string layer_name, const FeatureCollection& before,
                                     const FeatureCollection& after)
{
    return reduction_row(std::move(layer_name), vertex_count(before), vertex_count(after));
}

namespace detail {

inline std::string group_thousands(std::size_t n)
{
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i && (digits.size() - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

inline std::string percent_text(double p)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8f", p);
    return buf;
}

} // namespace detail

/// Aligned text table: layer name, unfiltered, filtered, percent removed.
inline std::string format_reduction_table(std::span<const ReductionRow> rows)
{
    std::size_t name_w = std::string_view("Layer name").size();
    for (const auto& r : rows) name_w = std::max(name_w, r.layer_name.size());
    std::string out;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %15s\n", static_cast<int>(name_w), "Layer name", "unfiltered",
                  "filtered", "percent removed");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s  %15s\n", static_cast<int>(name_w), r.layer_name.c_str(),
                      detail::group_thousands(r.unfiltered).c_str(), detail::group_thousands(r.filtered).c_str(),
                      detail::percent_text(r.percent_removed).c_str());
        out += buf;
    }
    return out;
}

inline std::string format_reduction_csv(std::span<const ReductionRow> rows)
{
    std::string out = "layer,unfiltered,filtered,percent_removed\n";
    for (const auto& r : rows) {
        out += r.layer_name.find_first_of(",\"") == std::string::npos ? r.layer_name : "\"" + r.layer_name + "\"";
        out += ',' + std::to_string(r.unfiltered) + ',' + std::to_string(r.filtered) + ','
            + detail::percent_text(r.percent_removed) + '\n';
    }
    return out;
}

} // namespace geovuln
