#pragma once

// Census CSV normalization and the consolidated vulnerability store.

#include "geovuln/error.hpp"
#include "geovuln/geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace geovuln::tabular {

using Row = std::vector<Value>;

struct Table {
    std::vector<std::string> columns;
    std::vector<Row> rows;

    friend bool operator==(const Table&, const Table&) = default;

    std::optional<std::size_t> column_index(std::string_view name) const
    {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        return std::nullopt;
    }
};

inline bool iequals(std::string_view a, std::string_view b)
{
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

struct CsvOptions {
    /// Columns kept as text even when their cells look numeric.
    std::vector<std::string> text_columns{"GEOID"};
};

namespace detail {

struct RawCell {
    std::string text;
    bool quoted = false;
};

/// RFC 4180 tokenizer. Accepts LF or CRLF record separators.
inline std::vector<std::vector<RawCell>> tokenize(std::string_view text)
{
    std::vector<std::vector<RawCell>> records;
    std::vector<RawCell> record;
    RawCell cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

    auto end_cell = [&] {
        record.push_back(std::move(cell));
        cell = {};
        cell_started = false;
    };
    auto end_record = [&] {
        end_cell();
        const bool blank = record.size() == 1 && record.front().text.empty() && !record.front().quoted;
        if (!blank) records.push_back(std::move(record));
        record.clear();
    };

    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.text.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell.text.push_back(c);
            }
            continue;
        }
        if (c == '"' && (!cell_started || cell.text.find_first_not_of(" \t") == std::string::npos) && !cell.quoted) {
            cell.text.clear(); // whitespace before an opening quote is padding
            in_quotes = true;
            cell.quoted = true;
            cell_started = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            end_record();
        } else {
            cell.text.push_back(c);
            cell_started = true;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field");
    if (cell_started || !record.empty() || cell.quoted) end_record();
    return records;
}

inline std::string clean_text(std::string_view raw, bool quoted)
{
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x20 || u == 0x7F) {
            if (c == '\t' && quoted) out.push_back(c);
            continue;
        }
        out.push_back(c);
    }
    const auto b = out.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = out.find_last_not_of(" \t");
    return out.substr(b, e - b + 1);
}

inline bool all_digits(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// Optional sign, digits with an optional single dot; thousands commas are
/// accepted only when `allow_grouping` (the cell was quoted).
inline std::optional<double> parse_number(std::string_view s, bool allow_grouping)
{
    if (s.empty()) return std::nullopt;
    std::string digits;
    std::size_t i = 0;
    if (s[0] == '+' || s[0] == '-') {
        if (s[0] == '-') digits.push_back('-');
        ++i;
    }
    const auto dot = s.find('.', i);
    const auto int_part = s.substr(i, dot == std::string_view::npos ? std::string_view::npos : dot - i);
    const auto frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if (dot != std::string_view::npos && !frac_part.empty() && !all_digits(frac_part)) return std::nullopt;
    if (int_part.empty() && frac_part.empty()) return std::nullopt;

    if (int_part.find(',') != std::string_view::npos) {
        if (!allow_grouping) return std::nullopt;
        std::size_t start = 0;
        std::size_t group = 0;
        while (true) {
            const auto comma = int_part.find(',', start);
            const auto piece = int_part.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            if (!all_digits(piece)) return std::nullopt;
            if (group == 0 ? piece.size() > 3 : piece.size() != 3) return std::nullopt;
            digits.append(piece);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
            ++group;
        }
    } else if (!int_part.empty()) {
        if (!all_digits(int_part)) return std::nullopt;
        digits.append(int_part);
    }
    if (int_part.empty()) digits.push_back('0');
    if (!frac_part.empty()) digits.append(".").append(frac_part);

    double v = 0.0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) return std::nullopt;
    return v;
}

} // namespace detail

/// Parses and cleans CSV text: trims cells, strips control characters,
/// converts numeric-looking cells and maps empty cells to null.
inline Table clean_csv(std::string_view text, const CsvOptions& options = {})
{
    const auto records = detail::tokenize(text);
    if (records.empty()) throw ParseError("empty CSV");

    Table t;
    std::vector<bool> text_only;
    for (const auto& raw : records.front()) {
        auto name = detail::clean_text(raw.text, raw.quoted);
        if (t.column_index(name)) throw ParseError("duplicate column " + name);
        const bool is_text = std::any_of(options.text_columns.begin(), options.text_columns.end(),
                                         [&](const std::string& c) { return iequals(c, name); });
        text_only.push_back(is_text);
        t.columns.push_back(std::move(name));
    }

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& raw = records[r];
        if (raw.size() != t.columns.size())
            throw ParseError("row " + std::to_string(r) + " has " + std::to_string(raw.size()) + " cells, expected "
                             + std::to_string(t.columns.size()));
        Row row;
        row.reserve(raw.size());
        for (std::size_t c = 0; c < raw.size(); ++c) {
            auto cell = detail::clean_text(raw[c].text, raw[c].quoted);
            if (cell.empty()) {
                row.emplace_back();
                continue;
            }
            if (!text_only[c]) {
                if (auto n = detail::parse_number(cell, raw[c].quoted)) {
                    row.emplace_back(*n);
                    continue;
                }
            }
            row.emplace_back(std::move(cell));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Text rendering shared by CSV export and table search.
inline std::string render_value(const Value& v)
{
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::monostate>)
                return {};
            else if constexpr (std::is_same_v<T, bool>)
                return x ? "true" : "false";
            else if constexpr (std::is_same_v<T, double>) {
                if (!std::isfinite(x)) return {};
                std::array<char, 512> buf;
                const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::fixed);
                return std::string(buf.data(), res.ptr);
            } else
                return x;
        },
        v);
}

inline std::string csv_escape(std::string_view s)
{
    // Tabs survive re-import only inside quotes.
    const bool needs_quotes = s.find_first_of(",\"\r\n\t") != std::string_view::npos
        || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
    if (!needs_quotes) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void append_csv_row(std::string& out, const std::vector<std::string>& cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(cells[i]);
    }
    out += "\r\n";
}

inline std::string write_csv(const Table& t)
{
    std::string out;
    append_csv_row(out, t.columns);
    for (const auto& row : t.rows) {
        std::vector<std::string> cells;
        cells.reserve(row.size());
        for (const auto& v : row) cells.push_back(render_value(v));
        append_csv_row(out, cells);
    }
    return out;
}

inline constexpr std::string_view kGroupColumn = "group";

namespace detail {

struct SuffixSplit {
    std::string base;
    std::string token;
};

inline std::optional<SuffixSplit> split_suffix(std::string_view name)
{
    const auto us = name.rfind('_');
    if (us == std::string_view::npos || us == 0 || us + 1 == name.size()) return std::nullopt;
    const auto token = name.substr(us + 1);
    if (!std::all_of(token.begin(), token.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }))
        return std::nullopt;
    return SuffixSplit{std::string(name.substr(0, us)), std::string(token)};
}

} // namespace detail

/// Turns column families sharing a base name (Population_A, Population_B)
/// into rows: one output row per input row and suffix token, with the token
/// in a `group` column. A family needs at least two suffixed members.
inline Table unpivot_double_headers(const Table& t, const std::vector<std::string>& id_columns)
{
    std::vector<std::size_t> id_idx;
    for (const auto& id : id_columns) {
        const auto i = t.column_index(id);
        if (!i) throw DomainError("id column " + id + " not found");
        id_idx.push_back(*i);
    }
    auto is_id = [&](std::size_t c) { return std::find(id_idx.begin(), id_idx.end(), c) != id_idx.end(); };

    std::map<std::string, std::size_t> family_size;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (!is_id(c))
            if (auto s = detail::split_suffix(t.columns[c])) ++family_size[s->base];

    std::vector<std::string> bases;  // first-appearance order
    std::vector<std::string> tokens; // first-appearance order
    std::map<std::pair<std::string, std::string>, std::size_t> member; // (base, token) → column
    std::vector<std::size_t> carried;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (is_id(c)) continue;
        const auto s = detail::split_suffix(t.columns[c]);
        if (!s || family_size[s->base] < 2) {
            carried.push_back(c);
            continue;
        }
        if (std::find(bases.begin(), bases.end(), s->base) == bases.end()) bases.push_back(s->base);
        if (std::find(tokens.begin(), tokens.end(), s->token) == tokens.end()) tokens.push_back(s->token);
        member[{s->base, s->token}] = c;
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const auto& name = t.columns[c];
        const bool base_exists = std::find(bases.begin(), bases.end(), name) != bases.end();
        const bool single_member = family_size.count(name) && !is_id(c);
        if (base_exists || single_member) throw DomainError("ambiguous column family " + name);
    }
    if (bases.empty()) return t;

    Table out;
    for (auto i : id_idx) out.columns.push_back(t.columns[i]);
    out.columns.emplace_back(kGroupColumn);
    for (const auto& b : bases) out.columns.push_back(b);
    for (auto c : carried) out.columns.push_back(t.columns[c]);
    std::set<std::string> seen;
    for (const auto& c : out.columns)
        if (!seen.insert(c).second) throw DomainError("duplicate column " + c + " after unpivot");

    for (const auto& row : t.rows) {
        for (const auto& token : tokens) {
            Row r;
            r.reserve(out.columns.size());
            for (auto i : id_idx) r.push_back(row[i]);
            r.emplace_back(token);
            for (const auto& b : bases) {
                const auto it = member.find({b, token});
                r.push_back(it == member.end() ? Value{} : row[it->second]);
            }
            for (auto c : carried) r.push_back(row[c]);
            out.rows.push_back(std::move(r));
        }
    }
    return out;
}

/// Splits an unpivoted table into one table per `group` token (without the
/// group column), keyed `<prefix>_<token>`. Tables without a group column
/// come back unchanged under `prefix`.
inline std::map<std::string, Table> split_by_group(const Table& t, const std::string& prefix)
{
    std::map<std::string, Table> out;
    const auto g = t.column_index(kGroupColumn);
    if (!g) {
        out.emplace(prefix, t);
        return out;
    }
    Table shape;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        if (c != *g) shape.columns.push_back(t.columns[c]);
    for (const auto& row : t.rows) {
        const auto* token = std::get_if<std::string>(&row[*g]);
        const std::string key = prefix + "_" + (token ? *token : render_value(row[*g]));
        auto [it, inserted] = out.try_emplace(key, Table{shape.columns, {}});
        Row r;
        r.reserve(shape.columns.size());
        for (std::size_t c = 0; c < row.size(); ++c)
            if (c != *g) r.push_back(row[c]);
        it->second.rows.push_back(std::move(r));
    }
    return out;
}

/// Case-insensitive glob with `*` wildcards.
inline bool glob_match(std::string_view pattern, std::string_view text)
{
    std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
    auto eq = [](char a, char b) {
        return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
    };
    while (t < text.size()) {
        if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (p < pattern.size() && eq(pattern[p], text[t])) {
            ++p;
            ++t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

inline const std::vector<std::string>& default_deny_patterns()
{
    static const std::vector<std::string> patterns{"*_MOE", "*_EST", "MarginOfError*"};
    return patterns;
}

/// Removes estimator / margin-of-error columns matching any deny pattern.
inline Table drop_statistical_columns(const Table& t, const std::vector<std::string>& deny = default_deny_patterns())
{
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const bool denied = std::any_of(deny.begin(), deny.end(),
                                        [&](const std::string& p) { return glob_match(p, t.columns[c]); });
        if (!denied) keep.push_back(c);
    }
    if (keep.empty()) throw DomainError("no data columns remain");
    if (keep.size() == t.columns.size()) return t;
    Table out;
    for (auto c : keep) out.columns.push_back(t.columns[c]);
    for (const auto& row : t.rows) {
        Row r;
        r.reserve(keep.size());
        for (auto c : keep) r.push_back(row[c]);
        out.rows.push_back(std::move(r));
    }
    return out;
}

// Vulnerability store.

struct Dataset {
    std::string label;
    std::vector<std::string> metrics;
    std::map<std::string, Row> records; // GEOID → one slot per metric

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct VulnerabilityStore {
    std::map<std::string, Dataset> datasets;
    friend bool operator==(const VulnerabilityStore&, const VulnerabilityStore&) = default;
};

/// Normalizes a block-group identifier to its 12 digits. Accepts the
/// census "1500000US" prefixed form.
inline std::optional<std::string> normalize_geoid(const Value& v)
{
    std::string s;
    if (const auto* text = std::get_if<std::string>(&v))
        s = *text;
    else if (const auto* num = std::get_if<double>(&v); num && *num >= 0 && std::floor(*num) == *num)
        s = render_value(*num);
    else
        return std::nullopt;
    if (const auto us = s.find("US"); us != std::string::npos) s = s.substr(us + 2);
    if (s.size() != 12 || !detail::all_digits(s)) return std::nullopt;
    return s;
}

struct ConsolidateResult {
    VulnerabilityStore store;
    std::size_t duplicate_warnings = 0;
};

inline ConsolidateResult consolidate(const std::map<std::string, Table>& tables, std::string_view geoid_column = "GEOID",
                                     const std::map<std::string, std::string>& labels = {})
{
    ConsolidateResult out;
    for (const auto& [id, table] : tables) {
        const auto geoid_idx = table.column_index(geoid_column);
        if (!geoid_idx) throw DomainError("dataset " + id + " lacks GEOID");
        Dataset ds;
        const auto label = labels.find(id);
        ds.label = label == labels.end() ? id : label->second;
        for (std::size_t c = 0; c < table.columns.size(); ++c)
            if (c != *geoid_idx) ds.metrics.push_back(table.columns[c]);
        for (const auto& row : table.rows) {
            const auto geoid = normalize_geoid(row[*geoid_idx]);
            if (!geoid)
                throw DomainError("invalid GEOID " + render_value(row[*geoid_idx]) + " in dataset " + id);
            Row values;
            values.reserve(ds.metrics.size());
            for (std::size_t c = 0; c < row.size(); ++c)
                if (c != *geoid_idx) values.push_back(row[c]);
            auto [it, inserted] = ds.records.insert_or_assign(*geoid, std::move(values));
            if (!inserted) ++out.duplicate_warnings;
        }
        out.store.datasets.emplace(id, std::move(ds));
    }
    return out;
}

namespace detail {

inline nlohmann::json value_to_json(const Value& v)
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

inline Value value_from_json(const nlohmann::json& j)
{
    if (j.is_null()) return Value{};
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ParseError("unsupported store value");
}

} // namespace detail

inline constexpr int kStoreVersion = 1;

/// `{"version":1,"datasets":{...}}` with sorted dataset ids and GEOIDs.
inline std::string serialize_store(const VulnerabilityStore& store)
{
    nlohmann::json datasets = nlohmann::json::object();
    for (const auto& [id, ds] : store.datasets) {
        nlohmann::json records = nlohmann::json::object();
        for (const auto& [geoid, values] : ds.records) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& v : values) arr.push_back(detail::value_to_json(v));
            records[geoid] = std::move(arr);
        }
        datasets[id] = {{"label", ds.label}, {"metrics", ds.metrics}, {"records", std::move(records)}};
    }
    return nlohmann::json{{"version", kStoreVersion}, {"datasets", std::move(datasets)}}.dump(
        -1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline VulnerabilityStore parse_store(std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("parse error at byte " + std::to_string(e.byte));
    }
    try {
        if (doc.at("version").get<int>() != kStoreVersion)
            throw ParseError("unsupported store version " + doc.at("version").dump());
        VulnerabilityStore store;
        for (const auto& [id, ds_json] : doc.at("datasets").items()) {
            Dataset ds;
            ds.label = ds_json.at("label").get<std::string>();
            ds.metrics = ds_json.at("metrics").get<std::vector<std::string>>();
            for (const auto& [geoid, values] : ds_json.at("records").items()) {
                if (!values.is_array() || values.size() != ds.metrics.size())
                    throw ParseError("record " + geoid + " in dataset " + id + " has wrong slot count");
                Row row;
                for (const auto& v : values) row.push_back(detail::value_from_json(v));
                ds.records.emplace(geoid, std::move(row));
            }
            store.datasets.emplace(id, std::move(ds));
        }
        return store;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed store: ") + e.what());
    }
}

} // namespace geovuln::tabular
