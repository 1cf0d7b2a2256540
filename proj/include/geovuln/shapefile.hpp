#pragma once

// ESRI shapefile triplet reader (SHP geometry, SHX index, DBF attributes).
// Supported shape types: Null (0), Point (1), PolyLine (3), Polygon (5) and
// MultiPoint (8). Z/M variants are rejected.

#include "geovuln/bytes.hpp"
#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"
#include "geovuln/simplify.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace geovuln::shapefile {

inline constexpr std::int32_t kFileCode = 9994;

enum class ShapeType : std::int32_t { null = 0, point = 1, polyline = 3, polygon = 5, multipoint = 8 };

struct ShxRecord {
    std::uint32_t offset_words = 0;
    std::uint32_t length_words = 0;
    friend bool operator==(const ShxRecord&, const ShxRecord&) = default;
};

struct ShxIndex {
    std::vector<ShxRecord> records;
};

struct ShpRecord {
    std::int32_t record_number = 0;
    std::optional<Geometry> geometry; // nullopt for Null shapes
};

struct DbfField {
    std::string name;
    char type = 'C';
    int length = 0;
    int decimals = 0;
};

struct DbfTable {
    std::vector<DbfField> fields;
    std::vector<Attributes> rows; // deleted rows excluded
};

namespace detail {

struct MainHeader {
    std::uint32_t file_length_bytes;
    std::int32_t shape_type;
};

inline MainHeader read_main_header(const ByteReader& r, const char* bad_magic)
{
    if (r.size() < 100) throw ParseError("unexpected end of file");
    if (r.i32(0, std::endian::big) != kFileCode) throw ParseError(bad_magic);
    const std::uint64_t words = r.u32(24, std::endian::big);
    if (words * 2 < 100) throw ParseError("corrupt header");
    if (words * 2 > r.size()) throw ParseError("unexpected end of file");
    return {static_cast<std::uint32_t>(words * 2), r.i32(32, std::endian::little)};
}

inline bool supported(std::int32_t type)
{
    return type == 0 || type == 1 || type == 3 || type == 5 || type == 8;
}

inline bool ring_contains(const Path& ring, const Coordinate& p)
{
    bool inside = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const auto& a = ring[i];
        const auto& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

/// Groups shapefile rings into polygons: clockwise rings are exteriors,
/// counter-clockwise rings are holes of the exterior that contains them.
inline Geometry assemble_rings(std::vector<Path> rings)
{
    std::vector<Polygon> polygons;
    for (auto& ring : rings) {
        const bool hole = ring_area2(ring) > 0.0;
        if (!hole || polygons.empty()) {
            polygons.push_back(Polygon{{std::move(ring)}});
            continue;
        }
        Polygon* owner = &polygons.back();
        for (auto& poly : polygons) {
            if (ring_contains(poly.rings.front(), ring.front())) {
                owner = &poly;
                break;
            }
        }
        owner->rings.push_back(std::move(ring));
    }
    if (polygons.size() == 1) return std::move(polygons.front());
    return MultiPolygon{std::move(polygons)};
}

inline Path read_points(const ByteReader& r, std::size_t offset, std::size_t count)
{
    Path out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = offset + i * 16;
        out.push_back({r.f64(at, std::endian::little), r.f64(at + 8, std::endian::little)});
    }
    return out;
}

/// Decodes one record payload; `content` is the record content span.
inline std::optional<Geometry> read_shape(ByteSpan content, std::int32_t file_type)
{
    const ByteReader r(content);
    const std::int32_t type = r.i32(0, std::endian::little);
    if (type == 0) {
        if (content.size() != 4) throw ParseError("corrupt record");
        return std::nullopt;
    }
    if (!supported(type)) throw ParseError("unsupported shape type " + std::to_string(type));
    if (type != file_type) throw ParseError("corrupt record");

    if (type == 1) {
        if (content.size() != 20) throw ParseError("corrupt record");
        return Point{{r.f64(4, std::endian::little), r.f64(12, std::endian::little)}};
    }
    if (type == 8) {
        const std::uint32_t n = r.u32(36, std::endian::little);
        if (content.size() != 40 + std::uint64_t{n} * 16) throw ParseError("corrupt record");
        if (n == 0) throw ParseError("corrupt record");
        return MultiPoint{read_points(r, 40, n)};
    }

    const std::uint32_t num_parts = r.u32(36, std::endian::little);
    const std::uint32_t num_points = r.u32(40, std::endian::little);
    if (content.size() != 44 + std::uint64_t{num_parts} * 4 + std::uint64_t{num_points} * 16 || num_parts == 0)
        throw ParseError("corrupt record");
    std::vector<std::uint32_t> starts(num_parts);
    for (std::uint32_t i = 0; i < num_parts; ++i) {
        starts[i] = r.u32(44 + std::size_t{i} * 4, std::endian::little);
        if ((i == 0 && starts[i] != 0) || (i > 0 && starts[i] <= starts[i - 1]) || starts[i] >= num_points)
            throw ParseError("corrupt record");
    }
    const std::size_t points_at = 44 + std::size_t{num_parts} * 4;
    std::vector<Path> parts;
    parts.reserve(num_parts);
    for (std::uint32_t i = 0; i < num_parts; ++i) {
        const std::uint32_t end = i + 1 < num_parts ? starts[i + 1] : num_points;
        parts.push_back(read_points(r, points_at + std::size_t{starts[i]} * 16, end - starts[i]));
    }

    if (type == 3) {
        for (const auto& p : parts)
            if (p.size() < 2) throw ParseError("corrupt record");
        if (parts.size() == 1) return LineString{std::move(parts.front())};
        return MultiLineString{std::move(parts)};
    }
    for (auto& ring : parts) {
        if (ring.front() != ring.back()) ring.push_back(ring.front());
        if (ring.size() < 4) throw ParseError("corrupt record");
    }
    return assemble_rings(std::move(parts));
}

} // namespace detail

inline ShxIndex parse_shx(ByteSpan bytes)
{
    const ByteReader r(bytes);
    const auto header = detail::read_main_header(r, "not a shapefile index");
    if ((header.file_length_bytes - 100) % 8 != 0) throw ParseError("corrupt index");
    ShxIndex index;
    const std::size_t count = (header.file_length_bytes - 100) / 8;
    index.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t at = 100 + i * 8;
        ShxRecord rec{r.u32(at, std::endian::big), r.u32(at + 4, std::endian::big)};
        if (rec.offset_words < 50 || (!index.records.empty() && rec.offset_words <= index.records.back().offset_words))
            throw ParseError("corrupt index");
        index.records.push_back(rec);
    }
    return index;
}

/// Sequential read of every record in file order.
inline std::vector<ShpRecord> parse_shp(ByteSpan bytes)
{
    const ByteReader r(bytes);
    const auto header = detail::read_main_header(r, "not a shapefile");
    if (!detail::supported(header.shape_type))
        throw ParseError("unsupported shape type " + std::to_string(header.shape_type));

    std::vector<ShpRecord> records;
    std::size_t offset = 100;
    while (offset < header.file_length_bytes) {
        const std::int32_t number = r.i32(offset, std::endian::big);
        const std::uint64_t content_bytes = std::uint64_t{r.u32(offset + 4, std::endian::big)} * 2;
        if (content_bytes < 4 || offset + 8 + content_bytes > header.file_length_bytes)
            throw ParseError("corrupt record");
        const auto content = r.slice(offset + 8, static_cast<std::size_t>(content_bytes));
        records.push_back({number, detail::read_shape(content, header.shape_type)});
        offset += 8 + static_cast<std::size_t>(content_bytes);
    }
    return records;
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline Value dbf_value(const DbfField& field, std::string_view raw)
{
    switch (field.type) {
    case 'C': {
        const auto end = raw.find_last_not_of(' ');
        return std::string(end == std::string_view::npos ? std::string_view{} : raw.substr(0, end + 1));
    }
    case 'N':
    case 'F': {
        auto s = trim(raw);
        if (!s.empty() && s.front() == '+') s.remove_prefix(1);
        if (s.empty()) return Value{};
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return Value{};
        return v;
    }
    case 'L': {
        const auto s = trim(raw);
        if (s.empty()) return Value{};
        switch (s.front()) {
        case 'T': case 't': case 'Y': case 'y': return true;
        case 'F': case 'f': case 'N': case 'n': return false;
        default: return Value{};
        }
    }
    case 'D': {
        const auto s = trim(raw);
        if (s.empty()) return Value{};
        const bool digits = s.size() == 8 && s.find_first_not_of("0123456789") == std::string_view::npos;
        if (!digits) return std::string(s);
        std::string iso;
        iso.reserve(10);
        iso.append(s.substr(0, 4)).append("-").append(s.substr(4, 2)).append("-").append(s.substr(6, 2));
        return iso;
    }
    }
    return Value{};
}

} // namespace detail

inline DbfTable parse_dbf(ByteSpan bytes)
{
    const ByteReader r(bytes);
    if (r.size() < 32 || (r.u8(0) & 0x0F) != 0x03) throw ParseError("malformed DBF header");
    const std::uint32_t row_count = r.u32(4, std::endian::little);
    const std::uint16_t header_len = r.u16(8, std::endian::little);
    const std::uint16_t record_len = r.u16(10, std::endian::little);

    DbfTable table;
    std::size_t at = 32;
    std::size_t field_bytes = 1; // deletion flag
    while (true) {
        if (!r.has(at, 1) || at >= header_len) throw ParseError("malformed DBF header");
        if (r.u8(at) == 0x0D) break;
        if (!r.has(at, 32)) throw ParseError("malformed DBF header");
        const auto name_bytes = r.slice(at, 11);
        std::string name;
        for (auto b : name_bytes) {
            if (b == 0) break;
            name.push_back(static_cast<char>(b));
        }
        DbfField field{name, static_cast<char>(r.u8(at + 11)), r.u8(at + 16), r.u8(at + 17)};
        if (std::string_view("CNFLD").find(field.type) == std::string_view::npos)
            throw ParseError(std::string("unsupported DBF field type ") + field.type);
        for (const auto& f : table.fields)
            if (f.name == field.name) throw ParseError("duplicate DBF field " + field.name);
        field_bytes += static_cast<std::size_t>(field.length);
        table.fields.push_back(std::move(field));
        at += 32;
    }
    if (field_bytes != record_len) throw ParseError("malformed DBF header");
    if (std::uint64_t{header_len} + std::uint64_t{row_count} * record_len > r.size())
        throw ParseError("truncated DBF");

    for (std::uint32_t i = 0; i < row_count; ++i) {
        const std::size_t row_at = header_len + std::size_t{i} * record_len;
        if (r.u8(row_at) == 0x2A) continue;
        Attributes row;
        std::size_t col = row_at + 1;
        for (const auto& f : table.fields) {
            const auto raw = r.slice(col, static_cast<std::size_t>(f.length));
            row.set(f.name, detail::dbf_value(f, {reinterpret_cast<const char*>(raw.data()), raw.size()}));
            col += static_cast<std::size_t>(f.length);
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

struct AssembleResult {
    FeatureCollection collection;
    std::size_t null_geometries = 0;
};

/// Pairs geometry i with attribute row i. Null geometries are dropped and
/// counted.
inline AssembleResult assemble(const std::vector<ShpRecord>& records, const DbfTable& dbf, int crs)
{
    if (records.size() != dbf.rows.size())
        throw DomainError("geometry/attribute count mismatch (" + std::to_string(records.size()) + " vs "
                          + std::to_string(dbf.rows.size()) + ")");
    AssembleResult out;
    out.collection.crs = crs;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].geometry) {
            ++out.null_geometries;
            continue;
        }
        out.collection.features.push_back({*records[i].geometry, dbf.rows[i], std::nullopt});
    }
    return out;
}

/// Reads `<stem>.shp` + `<stem>.dbf`, validating against `<stem>.shx` when
/// present.
inline AssembleResult read_shapefile(const std::filesystem::path& shp_path, int crs)
{
    auto stem = shp_path;
    const auto shp = read_file_bytes(shp_path.string());
    const auto records = parse_shp(shp);
    const auto shx_path = stem.replace_extension(".shx");
    if (std::filesystem::exists(shx_path)) {
        const auto shx = parse_shx(read_file_bytes(shx_path.string()));
        if (shx.records.size() != records.size())
            throw ParseError("index lists " + std::to_string(shx.records.size()) + " records, shapefile has "
                             + std::to_string(records.size()));
    }
    const auto dbf = parse_dbf(read_file_bytes(stem.replace_extension(".dbf").string()));
    return assemble(records, dbf, crs);
}

} // namespace geovuln::shapefile
