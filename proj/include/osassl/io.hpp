#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "osassl/core.hpp"

namespace osassl::io {

using json = nlohmann::json;

// ============================================================================
// CSV (RFC 4180)
// ============================================================================

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        throw Error("csv: missing column '" + name + "'");
    }

    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name)
                return true;
        return false;
    }
};

inline CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;

    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
        if (table.header.empty()) {
            table.header = std::move(record);
        } else if (!(record.size() == 1 && record[0].empty())) {
            if (record.size() != table.header.size())
                throw Error("csv: line " + std::to_string(line) + " has " + std::to_string(record.size()) +
                            " fields, expected " + std::to_string(table.header.size()));
            table.rows.push_back(std::move(record));
        }
        record.clear();
    };

    std::size_t i = 0;
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0)
        i = 3;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !field.empty())
                throw Error("csv: stray quote on line " + std::to_string(line));
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
            break;
        case '\r':
            break;
        case '\n':
            end_record();
            ++line;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (in_quotes)
        throw Error("csv: unterminated quoted field");
    if (!field.empty() || !record.empty())
        end_record();
    if (table.header.empty())
        throw Error("csv: missing header row");
    return table;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_file(path));
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

inline double parse_double(const std::string& s, const std::string& what) {
    if (s.empty())
        throw Error("missing value for " + what);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw Error("invalid number '" + s + "' for " + what);
    }
    if (pos != s.size() || !std::isfinite(v))
        throw Error("invalid number '" + s + "' for " + what);
    return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
    const double v = parse_double(s, what);
    if (v != std::floor(v))
        throw Error("expected an integer for " + what + ", got '" + s + "'");
    return static_cast<std::int64_t>(v);
}

/// Shortest round-tripping decimal representation.
inline std::string fmt(double v) {
    if (v == 0.0)
        return "0";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Accumulates an RFC 4180 document in memory.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row(header); }

    CsvWriter& row(const std::vector<std::string>& fields) {
        if (fields.size() != width_)
            throw Error("csv writer: row width mismatch");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i)
                out_ += ',';
            out_ += csv_escape(fields[i]);
        }
        out_ += "\r\n";
        return *this;
    }

    const std::string& str() const { return out_; }

private:
    std::size_t width_;
    std::string out_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write file '" + path.string() + "'");
    out << content;
}

// ============================================================================
// Schema sidecar and panel CSV
// ============================================================================

inline CovariateSchema schema_from_json(const json& j) {
    const json& list = j.is_object() && j.contains("covariates") ? j.at("covariates") : j;
    if (!list.is_array())
        throw Error("schema: expected an array of covariates");
    std::vector<CovariateEntry> entries;
    for (const auto& item : list) {
        CovariateEntry e;
        e.name = item.at("name").get<std::string>();
        const auto kind = item.value("kind", std::string("continuous"));
        if (kind == "continuous") {
            e.kind = CovariateKind::continuous;
        } else if (kind == "categorical") {
            e.kind = CovariateKind::categorical;
            e.levels = item.at("levels").get<int>();
        } else {
            throw Error("schema: unknown kind '" + kind + "' for '" + e.name + "'");
        }
        e.group = item.value("group", e.name);
        const auto role = item.value("role", std::string("x"));
        if (role == "x")
            e.role = CovariateRole::x;
        else if (role == "swi")
            e.role = CovariateRole::swi;
        else
            throw Error("schema: unknown role '" + role + "' for '" + e.name + "'");
        entries.push_back(std::move(e));
    }
    return CovariateSchema(std::move(entries));
}

inline json schema_to_json(const CovariateSchema& schema) {
    json list = json::array();
    for (const auto& e : schema.entries()) {
        json item{{"name", e.name},
                  {"kind", e.kind == CovariateKind::continuous ? "continuous" : "categorical"},
                  {"group", e.group},
                  {"role", e.role == CovariateRole::x ? "x" : "swi"}};
        if (e.kind == CovariateKind::categorical)
            item["levels"] = e.levels;
        list.push_back(std::move(item));
    }
    return json{{"covariates", std::move(list)}};
}

inline CovariateSchema read_schema(const std::filesystem::path& path) {
    try {
        return schema_from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

/// Panel from a CSV table with columns city, year, declared, cost and one
/// column per schema entry.
inline Panel panel_from_csv(const CsvTable& table, const CovariateSchema& schema,
                            std::optional<double> cost_bound = std::nullopt) {
    const auto c_city = table.column("city");
    const auto c_year = table.column("year");
    const auto c_decl = table.column("declared");
    const auto c_cost = table.column("cost");
    std::vector<std::size_t> c_x, c_z;
    for (auto i : schema.x_entries())
        c_x.push_back(table.column(schema.entries()[i].name));
    for (auto i : schema.z_entries())
        c_z.push_back(table.column(schema.entries()[i].name));

    std::map<std::int64_t, std::vector<Observation>> by_year;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = " (row " + std::to_string(r + 2) + ")";
        const CityId city{parse_int(row[c_city], "city" + where)};
        const TimeIndex year{parse_int(row[c_year], "year" + where)};
        const auto decl = parse_int(row[c_decl], "declared" + where);
        if (decl != 0 && decl != 1)
            throw Error("declared must be 0 or 1" + where);
        const double cost = parse_double(row[c_cost], "cost" + where);
        std::vector<double> x, z;
        x.reserve(c_x.size());
        z.reserve(c_z.size());
        for (std::size_t k = 0; k < c_x.size(); ++k)
            x.push_back(parse_double(row[c_x[k]], table.header[c_x[k]] + where));
        for (std::size_t k = 0; k < c_z.size(); ++k)
            z.push_back(parse_double(row[c_z[k]], table.header[c_z[k]] + where));
        try {
            by_year[year.value].emplace_back(city, year, std::move(x), std::move(z), cost, decl == 1);
        } catch (const Error& e) {
            throw Error(std::string(e.what()) + where);
        }
    }
    std::vector<PanelSlice> slices;
    for (auto& [year, obs] : by_year)
        slices.emplace_back(TimeIndex{year}, std::move(obs));
    return Panel::from_slices(schema, std::move(slices), cost_bound);
}

inline Panel read_panel(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path,
                        std::optional<double> cost_bound = std::nullopt) {
    const auto schema = read_schema(schema_path);
    const auto table = read_csv(csv_path);
    try {
        return panel_from_csv(table, schema, cost_bound);
    } catch (const Error& e) {
        throw Error(csv_path.string() + ": " + e.what());
    }
}

inline std::string panel_to_csv(const Panel& panel) {
    const auto& schema = panel.schema();
    std::vector<std::string> header{"city", "year", "declared", "cost"};
    for (const auto& e : schema.entries())
        header.push_back(e.name);
    CsvWriter w(header);
    for (std::size_t s = 0; s < panel.num_slices(); ++s) {
        for (const auto& o : panel.slice(s).observations()) {
            std::vector<std::string> row{std::to_string(o.city().value), std::to_string(o.time().value),
                                         o.declared() ? "1" : "0", fmt(o.y())};
            std::size_t xi = 0, zi = 0;
            for (const auto& e : schema.entries())
                row.push_back(fmt(e.role == CovariateRole::x ? o.x()[xi++] : o.z()[zi++]));
            w.row(row);
        }
    }
    return w.str();
}

}  // namespace osassl::io
