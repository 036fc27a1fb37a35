#include "dn/visspec.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dn/strings.hpp"

namespace dn::visspec {

const char* to_string(ChartType type) {
    switch (type) {
        case ChartType::bar: return "bar";
        case ChartType::stacked_bar: return "stacked_bar";
        case ChartType::grouped_bar: return "grouped_bar";
        case ChartType::line: return "line";
        case ChartType::pie: return "pie";
        case ChartType::scatter: return "scatter";
        case ChartType::bubble: return "bubble";
        case ChartType::area: return "area";
    }
    return "bar";
}

const std::vector<ChartType>& all_chart_types() {
    static const std::vector<ChartType> kAll = {
        ChartType::bar,     ChartType::stacked_bar, ChartType::grouped_bar, ChartType::line,
        ChartType::pie,     ChartType::scatter,     ChartType::bubble,      ChartType::area,
    };
    return kAll;
}

bool has_errors(const Report& report) {
    return std::any_of(report.begin(), report.end(),
                       [](const Issue& i) { return i.severity == Severity::error; });
}

namespace {

// Shipped as data/chart_types/rejected.json; this is the built-in copy so the
// library works without the data directory.
const std::set<std::string>& rejection_list() {
    static const std::set<std::string> kRejected = {
        "side-by-side bar chart",
        "side by side bar chart",
        "multi-dimensional infographic",
        "multi dimensional infographic",
        "summary chart",
        "combined",
        "combined chart",
        "infographic",
        "treemap",
    };
    return kRejected;
}

// Shipped as data/chart_types/synonyms.json.
const std::map<std::string, ChartType>& synonym_map() {
    static const std::map<std::string, ChartType> kSynonyms = {
        {"bar", ChartType::bar},
        {"bar chart", ChartType::bar},
        {"bar graph", ChartType::bar},
        {"simple bar", ChartType::bar},
        {"simple bar chart", ChartType::bar},
        {"vertical bar", ChartType::bar},
        {"column", ChartType::bar},
        {"column chart", ChartType::bar},
        {"stacked bar", ChartType::stacked_bar},
        {"stacked bar chart", ChartType::stacked_bar},
        {"stacked_bar", ChartType::stacked_bar},
        {"group bar", ChartType::grouped_bar},
        {"grouped bar", ChartType::grouped_bar},
        {"group bar chart", ChartType::grouped_bar},
        {"grouped bar chart", ChartType::grouped_bar},
        {"grouped_bar", ChartType::grouped_bar},
        {"line", ChartType::line},
        {"line chart", ChartType::line},
        {"line graph", ChartType::line},
        {"pie", ChartType::pie},
        {"pie chart", ChartType::pie},
        {"scatter", ChartType::scatter},
        {"scatterplot", ChartType::scatter},
        {"scatter plot", ChartType::scatter},
        {"scatter chart", ChartType::scatter},
        {"bubble", ChartType::bubble},
        {"bubble chart", ChartType::bubble},
        {"area", ChartType::area},
        {"area chart", ChartType::area},
    };
    return kSynonyms;
}

std::string canonicalize(const std::string& raw) {
    std::string s = to_lower(raw);
    std::replace(s.begin(), s.end(), '_', ' ');
    return collapse_ws(s);
}

}  // namespace

ChartType normalize_chart_type(const std::string& raw) {
    const std::string key = canonicalize(raw);
    if (key.empty())
        throw SpecError(SpecError::Code::missing_field, "chart_type is empty", raw);
    // Rejection takes priority: "side-by-side bar chart" must not fall through
    // to the "bar chart" synonym.
    std::string dashless = key;
    std::replace(dashless.begin(), dashless.end(), '-', ' ');
    dashless = collapse_ws(dashless);
    if (rejection_list().count(key) || rejection_list().count(dashless))
        throw SpecError(SpecError::Code::ambiguous_chart_type,
                        "ambiguous chart type: '" + raw + "'", raw);
    auto it = synonym_map().find(key);
    if (it == synonym_map().end())
        throw SpecError(SpecError::Code::ambiguous_chart_type,
                        "unknown or ambiguous chart type: '" + raw + "'", raw);
    return it->second;
}

VisSpec parse_visspec(const std::string& block) {
    static const std::set<std::string> kKeys = {"title", "chart_type", "table",
                                                "x",     "y",          "series", "notes"};
    std::map<std::string, std::string> kv;
    for (const auto& raw_line : split_lines(block)) {
        const std::string line = trim(raw_line);
        if (line.empty()) continue;
        const size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw SpecError(SpecError::Code::bad_value,
                            "expected 'key: value', got '" + line + "'", line);
        const std::string key = to_lower(trim(line.substr(0, colon)));
        const std::string value = trim(line.substr(colon + 1));
        if (!kKeys.count(key))
            throw SpecError(SpecError::Code::bad_value, "unknown key '" + key + "'", key);
        if (kv.count(key))
            throw SpecError(SpecError::Code::bad_value, "duplicate key '" + key + "'", key);
        kv[key] = value;
    }

    auto require = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end() || it->second.empty())
            throw SpecError(SpecError::Code::missing_field,
                            std::string("missing required key '") + key + "'", key);
        return it->second;
    };

    VisSpec spec;
    spec.chart_type = normalize_chart_type(require("chart_type"));
    spec.table_ref = require("table");
    spec.x = require("x");
    for (const auto& part : split(require("y"), ',')) {
        const std::string col = trim(part);
        if (!col.empty()) spec.y.push_back(col);
    }
    if (spec.y.empty())
        throw SpecError(SpecError::Code::missing_field, "y must name at least one column", "y");
    if (kv.count("title")) spec.title = kv["title"];
    if (kv.count("series") && !kv["series"].empty()) spec.series = kv["series"];
    if (kv.count("notes") && !kv["notes"].empty()) spec.notes = kv["notes"];

    if (spec.chart_type == ChartType::pie && spec.y.size() != 1)
        throw SpecError(SpecError::Code::bad_arity,
                        "pie charts plot exactly one y column, got " +
                            std::to_string(spec.y.size()));
    if (spec.chart_type == ChartType::bubble) {
        if (spec.y.size() != 1)
            throw SpecError(SpecError::Code::bad_arity,
                            "bubble charts plot exactly one y column, got " +
                                std::to_string(spec.y.size()));
        if (!spec.series)
            throw SpecError(SpecError::Code::missing_field,
                            "bubble charts need a size column in 'series'", "series");
    }

    std::set<std::string> used = {spec.x};
    for (const auto& col : spec.y)
        if (!used.insert(col).second)
            throw SpecError(SpecError::Code::duplicate_column,
                            "column '" + col + "' used more than once", col);
    if (spec.series && !used.insert(*spec.series).second)
        throw SpecError(SpecError::Code::duplicate_column,
                        "column '" + *spec.series + "' used more than once", *spec.series);
    return spec;
}

std::string serialize_visspec(const VisSpec& spec) {
    std::string out;
    if (!spec.title.empty()) out += "title: " + spec.title + "\n";
    out += std::string("chart_type: ") + to_string(spec.chart_type) + "\n";
    out += "table: " + spec.table_ref + "\n";
    out += "x: " + spec.x + "\n";
    out += "y: " + join(spec.y, ", ") + "\n";
    if (spec.series) out += "series: " + *spec.series + "\n";
    if (spec.notes) out += "notes: " + *spec.notes + "\n";
    return out;
}

namespace {

void check_column(const DataTable& table, const std::string& name, const std::string& path,
                  bool must_be_numeric, Report& report) {
    const Column* col = table.find_column(name);
    if (!col) {
        std::string hint;
        size_t best = std::string::npos;
        for (const auto& c : table.columns) {
            size_t d = levenshtein(to_lower(name), to_lower(c.name));
            if (d < best) {
                best = d;
                hint = c.name;
            }
        }
        std::string msg = "column '" + name + "' not found in table '" + table.id + "'";
        if (!hint.empty() && best <= 3) msg += "; nearest match '" + hint + "'";
        report.push_back({Severity::error, "unknown_column", msg, path});
        return;
    }
    if (must_be_numeric && col->kind != ColumnKind::number)
        report.push_back({Severity::error, "non_numeric_column",
                          "column '" + name + "' must be numeric for this role", path});
}

bool column_has_negative(const DataTable& table, const std::string& name) {
    int idx = table.column_index(name);
    if (idx < 0) return false;
    for (const auto& row : table.rows) {
        if (static_cast<size_t>(idx) >= row.size()) continue;
        const Cell& cell = row[static_cast<size_t>(idx)];
        if (cell_is_number(cell) && cell_number(cell) < 0) return true;
    }
    return false;
}

size_t distinct_values(const DataTable& table, const std::string& name) {
    int idx = table.column_index(name);
    if (idx < 0) return 0;
    std::set<std::string> values;
    for (const auto& row : table.rows)
        if (static_cast<size_t>(idx) < row.size())
            values.insert(cell_text(row[static_cast<size_t>(idx)]));
    return values.size();
}

}  // namespace

Report validate_visspec(const VisSpec& spec, const DataTableSet& tables) {
    Report report;
    const DataTable* table = tables.find_table(spec.table_ref);
    if (!table) {
        report.push_back({Severity::error, "unknown_table",
                          "table '" + spec.table_ref + "' not found", "table"});
        return report;
    }

    const bool numeric_x =
        spec.chart_type == ChartType::scatter || spec.chart_type == ChartType::bubble;
    check_column(*table, spec.x, "x", numeric_x, report);
    for (size_t i = 0; i < spec.y.size(); ++i)
        check_column(*table, spec.y[i], "y[" + std::to_string(i) + "]", true, report);
    if (spec.series) {
        // For bubble charts the series slot is the size column and must be numeric.
        check_column(*table, *spec.series, "series", spec.chart_type == ChartType::bubble,
                     report);
    }
    if (has_errors(report)) return report;

    if (spec.chart_type == ChartType::pie && column_has_negative(*table, spec.y[0]))
        report.push_back({Severity::error, "negative_pie_value",
                          "pie slices cannot plot negative values", "y[0]"});
    if (spec.chart_type == ChartType::stacked_bar) {
        for (size_t i = 0; i < spec.y.size(); ++i)
            if (column_has_negative(*table, spec.y[i]))
                report.push_back({Severity::error, "negative_stacked_value",
                                  "stacked bars cannot plot negative values",
                                  "y[" + std::to_string(i) + "]"});
    }
    if (spec.chart_type == ChartType::bubble && *spec.series != spec.x &&
        column_has_negative(*table, *spec.series))
        report.push_back({Severity::error, "negative_size_value",
                          "bubble sizes cannot be negative", "series"});

    if (spec.chart_type == ChartType::pie && table->rows.size() > 12)
        report.push_back({Severity::warning, "too_many_slices",
                          "pie with " + std::to_string(table->rows.size()) +
                              " slices is hard to read",
                          "y[0]"});
    size_t series_count = spec.y.size();
    if (spec.series && spec.chart_type != ChartType::bubble)
        series_count = std::max(series_count, distinct_values(*table, *spec.series));
    if (series_count > 8)
        report.push_back({Severity::warning, "too_many_series",
                          std::to_string(series_count) + " series exceed the readable limit of 8",
                          "series"});
    return report;
}

}  // namespace dn::visspec
