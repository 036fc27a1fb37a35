#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dn/error.hpp"
#include "dn/table.hpp"

namespace dn::visspec {

/// Closed set of renderable chart families. Anything outside it is rejected
/// at parse time, including the known-ambiguous strings shipped under
/// data/chart_types/rejected.json.
enum class ChartType { bar, stacked_bar, grouped_bar, line, pie, scatter, bubble, area };

const char* to_string(ChartType type);
const std::vector<ChartType>& all_chart_types();

class SpecError : public dn::Error {
public:
    enum class Code {
        ambiguous_chart_type,
        missing_field,
        bad_arity,
        bad_value,
        duplicate_column,
    };

    SpecError(Code code, const std::string& what, std::string offending = "")
        : dn::Error(what), code_(code), offending_(std::move(offending)) {}

    Code code() const { return code_; }
    /// The raw string that triggered the error (chart type name, key, ...).
    const std::string& offending() const { return offending_; }

private:
    Code code_;
    std::string offending_;
};

struct VisSpec {
    std::string title;
    ChartType chart_type = ChartType::bar;
    std::string table_ref;
    std::string x;
    std::vector<std::string> y;          // >=1; pie uses exactly 1
    std::optional<std::string> series;   // grouping column; bubble: size column
    std::optional<std::string> notes;

    bool operator==(const VisSpec&) const = default;
};

enum class Severity { error, warning };

struct Issue {
    Severity severity = Severity::error;
    std::string code;
    std::string message;
    std::string path;  // e.g. "x", "y[1]", "table"
};

using Report = std::vector<Issue>;

bool has_errors(const Report& report);

/// Maps a raw chart-type string into the closed ChartType set, applying the
/// case-insensitive synonym map. Strings on the rejection list, and strings
/// not covered by the map, raise SpecError{ambiguous_chart_type}.
ChartType normalize_chart_type(const std::string& raw);

/// Parses the interior of a fenced visspec block: `key: value` lines with
/// keys from {title, chart_type, table, x, y, series, notes}; y accepts a
/// comma-separated list. Throws SpecError on any grammar violation.
VisSpec parse_visspec(const std::string& block);

/// Canonical key:value rendering; parse_visspec(serialize_visspec(s)) == s.
std::string serialize_visspec(const VisSpec& spec);

/// Resolves the spec against its table set. Report-style: never throws;
/// empty report means the spec is fully renderable.
Report validate_visspec(const VisSpec& spec, const DataTableSet& tables);

struct RenderOptions {
    int width = 640;
    int height = 400;
    std::vector<std::string> palette;  // empty -> default palette
};

class RenderError : public dn::Error {
public:
    explicit RenderError(const std::string& what) : dn::Error(what) {}
};

/// Renders the spec to a standalone SVG 1.1 document. Deterministic: identical
/// (spec, tables, opts) produce byte-identical output. Requires a spec that
/// passed validate_visspec with no errors; throws RenderError{EmptyData} when
/// the referenced table has no rows.
std::string render_svg(const VisSpec& spec, const DataTableSet& tables,
                       const RenderOptions& opts = {});

}  // namespace dn::visspec
