#pragma once

#include "geovuln/bytes.hpp"
#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace geovuln::raster {

struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = -1.0; // negative for north-up
    friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

struct RasterGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values; // row-major, width*height
    std::optional<double> nodata;
    GeoTransform transform;
    int crs = kEpsgWgs84;

    friend bool operator==(const RasterGrid&, const RasterGrid&) = default;

    double at(std::size_t col, std::size_t row) const { return values[row * width + col]; }

    bool is_nodata(double v) const
    {
        if (!nodata) return false;
        return v == *nodata || (std::isnan(*nodata) && std::isnan(v));
    }

    BBox extent() const
    {
        const double x1 = transform.origin_x + static_cast<double>(width) * transform.pixel_size_x;
        const double y1 = transform.origin_y + static_cast<double>(height) * transform.pixel_size_y;
        return {std::min(transform.origin_x, x1), std::min(transform.origin_y, y1), std::max(transform.origin_x, x1),
                std::max(transform.origin_y, y1)};
    }
};

enum class OverviewMethod { average, nearest };

inline std::string_view method_name(OverviewMethod m) { return m == OverviewMethod::average ? "average" : "nearest"; }

inline OverviewMethod parse_method(std::string_view s)
{
    if (s == "average") return OverviewMethod::average;
    if (s == "nearest") return OverviewMethod::nearest;
    throw DomainError("unknown overview method " + std::string(s));
}

struct RasterPyramid {
    std::vector<RasterGrid> levels; // levels[0] is the source grid
    OverviewMethod method = OverviewMethod::average;
    friend bool operator==(const RasterPyramid&, const RasterPyramid&) = default;
};

// GeoTIFF parsing.

namespace detail {

enum : std::uint16_t {
    kImageWidth = 256,
    kImageLength = 257,
    kBitsPerSample = 258,
    kCompression = 259,
    kStripOffsets = 273,
    kSamplesPerPixel = 277,
    kRowsPerStrip = 278,
    kStripByteCounts = 279,
    kTileWidth = 322,
    kSampleFormat = 339,
    kModelPixelScale = 33550,
    kModelTiepoint = 33922,
    kGeoKeyDirectory = 34735,
    kGdalNodata = 42113,
};

struct IfdEntry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::size_t data_offset = 0; // absolute offset of the value bytes
};

inline std::size_t type_size(std::uint16_t type)
{
    switch (type) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: return 4;
    case 5: case 10: case 12: return 8;
    default: return 0;
    }
}

class Ifd {
public:
    Ifd(const ByteReader& r, std::endian order, std::size_t offset) : r_(r), order_(order)
    {
        const std::uint16_t n = r.u16(offset, order);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t at = offset + 2 + i * 12;
            IfdEntry e;
            const std::uint16_t tag = r.u16(at, order);
            e.type = r.u16(at + 2, order);
            e.count = r.u32(at + 4, order);
            const std::size_t size = type_size(e.type);
            if (size == 0) continue; // unknown types are skipped
            const std::uint64_t total = std::uint64_t{size} * e.count;
            e.data_offset = total <= 4 ? at + 8 : r.u32(at + 8, order);
            if (!r.has(e.data_offset, static_cast<std::size_t>(std::min<std::uint64_t>(total, r.size() + 1))))
                throw ParseError("unexpected end of file");
            entries_[tag] = e;
        }
    }

    bool has(std::uint16_t tag) const { return entries_.count(tag) != 0; }

    std::vector<double> numbers(std::uint16_t tag) const
    {
        const auto it = entries_.find(tag);
        if (it == entries_.end()) return {};
        const auto& e = it->second;
        std::vector<double> out;
        out.reserve(e.count);
        const std::size_t size = type_size(e.type);
        for (std::size_t i = 0; i < e.count; ++i) {
            const std::size_t at = e.data_offset + i * size;
            switch (e.type) {
            case 1: case 7: out.push_back(r_.u8(at)); break;
            case 6: out.push_back(static_cast<std::int8_t>(r_.u8(at))); break;
            case 3: out.push_back(r_.u16(at, order_)); break;
            case 8: out.push_back(static_cast<std::int16_t>(r_.u16(at, order_))); break;
            case 4: out.push_back(r_.u32(at, order_)); break;
            case 9: out.push_back(r_.i32(at, order_)); break;
            case 11: out.push_back(r_.f32(at, order_)); break;
            case 12: out.push_back(r_.f64(at, order_)); break;
            case 5: {
                const double den = r_.u32(at + 4, order_);
                out.push_back(den == 0 ? 0.0 : r_.u32(at, order_) / den);
                break;
            }
            case 10: {
                const double den = r_.i32(at + 4, order_);
                out.push_back(den == 0 ? 0.0 : r_.i32(at, order_) / den);
                break;
            }
            default: throw ParseError("unsupported TIFF field type");
            }
        }
        return out;
    }

    std::optional<double> number(std::uint16_t tag) const
    {
        const auto v = numbers(tag);
        if (v.empty()) return std::nullopt;
        return v.front();
    }

    std::optional<std::string> ascii(std::uint16_t tag) const
    {
        const auto it = entries_.find(tag);
        if (it == entries_.end() || it->second.type != 2) return std::nullopt;
        const auto bytes = r_.slice(it->second.data_offset, it->second.count);
        std::string s(bytes.begin(), bytes.end());
        while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.pop_back();
        return s;
    }

private:
    const ByteReader& r_;
    std::endian order_;
    std::map<std::uint16_t, IfdEntry> entries_;
};

inline std::optional<double> parse_nodata(const std::string& text)
{
    std::string_view s(text);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    if (s == "nan" || s == "NaN" || s == "NAN") return std::nan("");
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw ParseError("invalid GDAL_NODATA value");
    return v;
}

/// CRS from GeoKeyDirectory: ProjectedCSType (3072) wins over
/// GeographicType (2048).
inline std::optional<int> crs_from_geokeys(const std::vector<double>& dir)
{
    if (dir.size() < 4) return std::nullopt;
    const std::size_t keys = static_cast<std::size_t>(dir[3]);
    std::optional<int> geographic;
    std::optional<int> projected;
    for (std::size_t k = 0; k < keys && 4 + k * 4 + 3 < dir.size(); ++k) {
        const auto id = static_cast<int>(dir[4 + k * 4]);
        const auto location = static_cast<int>(dir[4 + k * 4 + 1]);
        const auto value = static_cast<int>(dir[4 + k * 4 + 3]);
        if (location != 0) continue;
        if (id == 2048) geographic = value;
        if (id == 3072) projected = value;
    }
    return projected ? projected : geographic;
}

} // namespace detail

/// Classic, uncompressed, single-band, strip-organized GeoTIFF.
inline RasterGrid parse_geotiff(ByteSpan bytes)
{
    using namespace detail;
    const ByteReader r(bytes);
    if (r.size() < 8) throw ParseError("not a TIFF");
    std::endian order;
    if (r.u8(0) == 'I' && r.u8(1) == 'I')
        order = std::endian::little;
    else if (r.u8(0) == 'M' && r.u8(1) == 'M')
        order = std::endian::big;
    else
        throw ParseError("not a TIFF");
    const std::uint16_t magic = r.u16(2, order);
    if (magic == 43) throw ParseError("BigTIFF unsupported");
    if (magic != 42) throw ParseError("not a TIFF");

    const Ifd ifd(r, order, r.u32(4, order));
    if (ifd.number(kCompression).value_or(1) != 1) throw ParseError("compression unsupported");
    if (ifd.has(kTileWidth)) throw ParseError("tiled TIFF unsupported");
    if (ifd.number(kSamplesPerPixel).value_or(1) != 1) throw ParseError("multi-band TIFF unsupported");
    if (!ifd.has(kModelPixelScale) || !ifd.has(kModelTiepoint)) throw ParseError("not a GeoTIFF");

    const auto width_v = ifd.number(kImageWidth);
    const auto height_v = ifd.number(kImageLength);
    if (!width_v || !height_v || *width_v < 1 || *height_v < 1) throw ParseError("missing image dimensions");
    const auto width = static_cast<std::size_t>(*width_v);
    const auto height = static_cast<std::size_t>(*height_v);
    const int bits = static_cast<int>(ifd.number(kBitsPerSample).value_or(1));
    const int format = static_cast<int>(ifd.number(kSampleFormat).value_or(1));
    const bool ok_format = (format == 1 || format == 2) ? (bits == 8 || bits == 16 || bits == 32)
                         : format == 3                  ? (bits == 32 || bits == 64)
                                                        : false;
    if (!ok_format) throw ParseError("unsupported sample format");
    const std::size_t sample_bytes = static_cast<std::size_t>(bits) / 8;
    if (width > r.size() || height > r.size() || width * height > r.size() / sample_bytes)
        throw ParseError("unexpected end of file");

    const auto offsets = ifd.numbers(kStripOffsets);
    const auto counts = ifd.numbers(kStripByteCounts);
    if (offsets.empty() || offsets.size() != counts.size()) throw ParseError("missing strip layout");

    RasterGrid grid;
    grid.width = width;
    grid.height = height;
    grid.values.reserve(width * height);
    const std::size_t needed = width * height;
    for (std::size_t s = 0; s < offsets.size() && grid.values.size() < needed; ++s) {
        const auto strip = r.slice(static_cast<std::size_t>(offsets[s]), static_cast<std::size_t>(counts[s]));
        const ByteReader sr(strip);
        for (std::size_t at = 0; at + sample_bytes <= strip.size() && grid.values.size() < needed; at += sample_bytes) {
            double v = 0.0;
            if (format == 3)
                v = bits == 32 ? static_cast<double>(sr.f32(at, order)) : sr.f64(at, order);
            else if (format == 1)
                v = bits == 8 ? sr.u8(at) : bits == 16 ? sr.u16(at, order) : static_cast<double>(sr.u32(at, order));
            else
                v = bits == 8    ? static_cast<std::int8_t>(sr.u8(at))
                  : bits == 16 ? static_cast<std::int16_t>(sr.u16(at, order))
                               : static_cast<double>(sr.i32(at, order));
            grid.values.push_back(v);
        }
    }
    if (grid.values.size() != needed) throw ParseError("unexpected end of file");

    const auto scale = ifd.numbers(kModelPixelScale);
    const auto tie = ifd.numbers(kModelTiepoint);
    if (scale.size() < 2 || tie.size() < 6 || !(scale[0] > 0.0) || !std::isfinite(scale[1]))
        throw ParseError("not a GeoTIFF");
    grid.transform.pixel_size_x = scale[0];
    grid.transform.pixel_size_y = -scale[1];
    grid.transform.origin_x = tie[3] - tie[0] * scale[0];
    grid.transform.origin_y = tie[4] + tie[1] * scale[1];
    if (auto text = ifd.ascii(kGdalNodata)) grid.nodata = parse_nodata(*text);
    grid.crs = crs_from_geokeys(ifd.numbers(kGeoKeyDirectory)).value_or(kEpsgWgs84);
    return grid;
}

// Overviews.

inline RasterGrid downsample(const RasterGrid& src, OverviewMethod method)
{
    RasterGrid out;
    out.width = (src.width + 1) / 2;
    out.height = (src.height + 1) / 2;
    out.nodata = src.nodata;
    out.crs = src.crs;
    out.transform = src.transform;
    out.transform.pixel_size_x *= 2.0;
    out.transform.pixel_size_y *= 2.0;
    out.values.resize(out.width * out.height);
    const double empty = src.nodata.value_or(std::nan(""));
    for (std::size_t j = 0; j < out.height; ++j) {
        for (std::size_t i = 0; i < out.width; ++i) {
            double& cell = out.values[j * out.width + i];
            if (method == OverviewMethod::nearest) {
                cell = src.at(2 * i, 2 * j);
                continue;
            }
            double sum = 0.0;
            int n = 0;
            for (std::size_t dj = 0; dj < 2; ++dj) {
                for (std::size_t di = 0; di < 2; ++di) {
                    const std::size_t c = 2 * i + di;
                    const std::size_t r = 2 * j + dj;
                    if (c >= src.width || r >= src.height) continue;
                    const double v = src.at(c, r);
                    if (src.is_nodata(v)) continue;
                    sum += v;
                    ++n;
                }
            }
            cell = n == 0 ? empty : sum / n;
        }
    }
    return out;
}

/// Level k has ceil(base/2^k) pixels per side. Stops at 1×1 or after
/// max_levels overview levels.
inline RasterPyramid build_overviews(const RasterGrid& grid, int max_levels, OverviewMethod method)
{
    if (max_levels < 0) throw DomainError("max_levels must be >= 0");
    RasterPyramid p;
    p.method = method;
    p.levels.push_back(grid);
    while (static_cast<int>(p.levels.size()) - 1 < max_levels) {
        const auto& last = p.levels.back();
        if (last.width <= 1 && last.height <= 1) break;
        p.levels.push_back(downsample(last, method));
    }
    return p;
}

/// Coarsest level whose resolution (pixels per CRS unit) still meets the
/// request; level 0 when nothing does.
inline std::size_t select_level(const RasterPyramid& pyramid, double requested_pixels_per_unit)
{
    if (!(requested_pixels_per_unit > 0.0)) throw DomainError("requested resolution must be > 0");
    for (std::size_t k = pyramid.levels.size(); k-- > 0;) {
        const double resolution = 1.0 / pyramid.levels[k].transform.pixel_size_x;
        if (resolution >= requested_pixels_per_unit * (1.0 - 1e-12)) return k;
    }
    return 0;
}

struct WindowGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;
    BBox bbox;
    std::size_t level_used = 0;
    std::optional<double> nodata;
};

namespace detail {

struct PixelRange {
    std::size_t col0, col1, row0, row1;
};

inline PixelRange pixel_range(const RasterGrid& g, const BBox& box)
{
    constexpr double eps = 1e-9;
    const auto& t = g.transform;
    const double ysize = std::abs(t.pixel_size_y);
    auto clamp_to = [](double v, std::size_t hi) {
        return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(hi)));
    };
    const double c0 = std::floor((box.min_x - t.origin_x) / t.pixel_size_x + eps);
    const double c1 = std::ceil((box.max_x - t.origin_x) / t.pixel_size_x - eps);
    const double r0 = std::floor((t.origin_y - box.max_y) / ysize + eps);
    const double r1 = std::ceil((t.origin_y - box.min_y) / ysize - eps);
    PixelRange pr{clamp_to(c0, g.width), clamp_to(c1, g.width), clamp_to(r0, g.height), clamp_to(r1, g.height)};
    // A degenerate (zero-area) request still returns the pixel it touches.
    if (pr.col1 == pr.col0) pr.col1 < g.width ? ++pr.col1 : --pr.col0;
    if (pr.row1 == pr.row0) pr.row1 < g.height ? ++pr.row1 : --pr.row0;
    return pr;
}

} // namespace detail

/// Clipped sub-grid of the finest level whose window fits within max_px on
/// its longer side.
inline WindowGrid read_window(const RasterPyramid& pyramid, const BBox& bbox, std::size_t max_px)
{
    if (pyramid.levels.empty()) throw DomainError("empty pyramid");
    if (max_px < 1) throw DomainError("max_px must be >= 1");
    if (!(bbox.min_x <= bbox.max_x && bbox.min_y <= bbox.max_y)) throw DomainError("malformed bbox");
    if (!pyramid.levels.front().extent().intersects(bbox)) throw DomainError("window outside raster extent");

    for (std::size_t k = 0; k < pyramid.levels.size(); ++k) {
        const auto& g = pyramid.levels[k];
        const auto pr = detail::pixel_range(g, bbox);
        const std::size_t w = pr.col1 - pr.col0;
        const std::size_t h = pr.row1 - pr.row0;
        if (std::max(w, h) > max_px) continue;
        WindowGrid out;
        out.width = w;
        out.height = h;
        out.level_used = k;
        out.nodata = g.nodata;
        out.values.reserve(w * h);
        for (std::size_t r = pr.row0; r < pr.row1; ++r)
            for (std::size_t c = pr.col0; c < pr.col1; ++c) out.values.push_back(g.at(c, r));
        const auto& t = g.transform;
        const double x0 = t.origin_x + static_cast<double>(pr.col0) * t.pixel_size_x;
        const double x1 = t.origin_x + static_cast<double>(pr.col1) * t.pixel_size_x;
        const double y0 = t.origin_y + static_cast<double>(pr.row0) * t.pixel_size_y;
        const double y1 = t.origin_y + static_cast<double>(pr.row1) * t.pixel_size_y;
        out.bbox = {std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
        return out;
    }
    throw DomainError("window exceeds max_px at the coarsest level");
}

// Pyramid file: "GVPYRMD1", u32 method, u32 levels, i32 crs, u8 has_nodata,
// f64 nodata, then per level u32 width, u32 height, f64 origin_x, origin_y,
// pixel_size_x, pixel_size_y and width*height f64 samples. Little-endian.

inline constexpr std::string_view kPyramidMagic = "GVPYRMD1";

namespace detail {

template <class T>
void put(std::string& out, T v)
{
    const auto raw = std::bit_cast<std::array<char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::little)
        out.append(raw.begin(), raw.end());
    else
        out.append(raw.rbegin(), raw.rend());
}

} // namespace detail

inline std::string write_pyramid(const RasterPyramid& p)
{
    if (p.levels.empty()) throw DomainError("empty pyramid");
    std::string out(kPyramidMagic);
    const auto& base = p.levels.front();
    detail::put<std::uint32_t>(out, p.method == OverviewMethod::average ? 0 : 1);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.levels.size()));
    detail::put<std::int32_t>(out, base.crs);
    detail::put<std::uint8_t>(out, base.nodata ? 1 : 0);
    detail::put<double>(out, base.nodata.value_or(0.0));
    for (const auto& g : p.levels) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.width));
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(g.height));
        detail::put<double>(out, g.transform.origin_x);
        detail::put<double>(out, g.transform.origin_y);
        detail::put<double>(out, g.transform.pixel_size_x);
        detail::put<double>(out, g.transform.pixel_size_y);
        for (double v : g.values) detail::put<double>(out, v);
    }
    return out;
}

inline RasterPyramid read_pyramid(ByteSpan bytes)
{
    const ByteReader r(bytes);
    const auto magic = r.slice(0, kPyramidMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kPyramidMagic.begin())) throw ParseError("not a pyramid file");
    constexpr auto le = std::endian::little;
    RasterPyramid p;
    const std::uint32_t method = r.u32(8, le);
    if (method > 1) throw ParseError("unknown overview method");
    p.method = method == 0 ? OverviewMethod::average : OverviewMethod::nearest;
    const std::uint32_t levels = r.u32(12, le);
    const std::int32_t crs = r.i32(16, le);
    const bool has_nodata = r.u8(20) != 0;
    const double nodata = r.f64(21, le);
    std::size_t at = 29;
    for (std::uint32_t k = 0; k < levels; ++k) {
        RasterGrid g;
        g.width = r.u32(at, le);
        g.height = r.u32(at + 4, le);
        g.transform = {r.f64(at + 8, le), r.f64(at + 16, le), r.f64(at + 24, le), r.f64(at + 32, le)};
        g.crs = crs;
        if (has_nodata) g.nodata = nodata;
        at += 40;
        const std::uint64_t n = std::uint64_t{g.width} * g.height;
        if (!r.has(at, 0) || n > (r.size() - at) / 8) throw ParseError("unexpected end of file");
        g.values.reserve(static_cast<std::size_t>(n));
        for (std::uint64_t i = 0; i < n; ++i, at += 8) g.values.push_back(r.f64(at, le));
        p.levels.push_back(std::move(g));
    }
    if (p.levels.empty()) throw ParseError("empty pyramid");
    return p;
}

} // namespace geovuln::raster
