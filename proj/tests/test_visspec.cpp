#include <doctest.h>

#include <cmath>
#include <random>

#include "common/test_util.hpp"
#include "dn/visspec.hpp"

using namespace dn;
using namespace dn::visspec;

namespace {

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t count = 0;
    for (size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++count;
    return count;
}

size_t count_marks(const std::string& svg, const std::string& element) {
    return count_occurrences(svg, "<" + element + " class=\"mark\"");
}

DataTableSet numeric_table(size_t rows) {
    DataTableSet set;
    DataTable t;
    t.id = "t0";
    t.title = "numbers";
    t.columns = {{"X", ColumnKind::number, {}},
                 {"Y", ColumnKind::number, {}},
                 {"Z", ColumnKind::number, {}}};
    for (size_t i = 0; i < rows; ++i)
        t.rows.push_back({double(i), double(10 + i * 3 % 17), double(1 + i % 5)});
    set.tables.push_back(std::move(t));
    return set;
}

}  // namespace

TEST_CASE("minimal block parses with defaults") {
    const VisSpec spec = parse_visspec("chart_type: bar\ntable: t0\nx: Year\ny: Approval");
    CHECK(spec.chart_type == ChartType::bar);
    CHECK(spec.table_ref == "t0");
    CHECK(spec.x == "Year");
    CHECK(spec.y == std::vector<std::string>{"Approval"});
    CHECK(spec.title.empty());
    CHECK_FALSE(spec.series.has_value());
}

TEST_CASE("synonyms normalize case-insensitively") {
    CHECK(normalize_chart_type("Scatter Plot") == ChartType::scatter);
    CHECK(normalize_chart_type("scatterplot") == ChartType::scatter);
    CHECK(normalize_chart_type("Simple bar") == ChartType::bar);
    CHECK(normalize_chart_type("bar chart") == ChartType::bar);
    CHECK(normalize_chart_type("LINE CHART") == ChartType::line);
    CHECK(normalize_chart_type("stacked bar") == ChartType::stacked_bar);
    CHECK(normalize_chart_type("group bar") == ChartType::grouped_bar);
    CHECK(normalize_chart_type("grouped bar") == ChartType::grouped_bar);
    CHECK(normalize_chart_type("bubble") == ChartType::bubble);
    CHECK(normalize_chart_type("Area Chart") == ChartType::area);
}

TEST_CASE("rejection list raises AmbiguousChartType naming the string") {
    for (const char* raw : {"side-by-side bar chart", "multi-dimensional infographic",
                            "summary chart", "combined", "infographic"}) {
        try {
            normalize_chart_type(raw);
            FAIL("expected rejection for ", raw);
        } catch (const SpecError& e) {
            CHECK(e.code() == SpecError::Code::ambiguous_chart_type);
            CHECK(e.offending() == raw);
            CHECK(std::string(e.what()).find(raw) != std::string::npos);
        }
    }
}

TEST_CASE("unknown strings outside the synonym map are ambiguous too") {
    CHECK_THROWS_AS(normalize_chart_type("hexbin density mosaic"), SpecError);
    CHECK_THROWS_AS(parse_visspec("chart_type: side-by-side bar chart\ntable: t0\nx: "
                                  "Year\ny: Approval"),
                    SpecError);
}

TEST_CASE("missing required keys raise MissingField") {
    try {
        parse_visspec("chart_type: bar\nx: Year\ny: Approval");
        FAIL("expected missing field");
    } catch (const SpecError& e) {
        CHECK(e.code() == SpecError::Code::missing_field);
        CHECK(e.offending() == "table");
    }
    CHECK_THROWS_AS(parse_visspec("table: t0\nx: Year\ny: Approval"), SpecError);
}

TEST_CASE("arity rules: pie takes one y, bubble needs a size column") {
    CHECK_THROWS_AS(parse_visspec("chart_type: pie\ntable: t0\nx: A\ny: B, C"), SpecError);
    CHECK_THROWS_AS(parse_visspec("chart_type: bubble\ntable: t0\nx: A\ny: B"), SpecError);
    const VisSpec bubble =
        parse_visspec("chart_type: bubble\ntable: t0\nx: A\ny: B\nseries: S");
    CHECK(bubble.series == "S");
}

TEST_CASE("duplicate columns across x/y/series are rejected") {
    CHECK_THROWS_AS(parse_visspec("chart_type: bar\ntable: t0\nx: A\ny: A"), SpecError);
    CHECK_THROWS_AS(parse_visspec("chart_type: line\ntable: t0\nx: A\ny: B\nseries: B"),
                    SpecError);
}

TEST_CASE("serialize/parse round-trip") {
    const VisSpec spec = parse_visspec(
        "title: Enthusiasm\nchart_type: grouped bar\ntable: t1\nx: Month\ny: Rep, "
        "Dem\nnotes: September spike");
    const VisSpec back = parse_visspec(serialize_visspec(spec));
    CHECK(back == spec);
}

TEST_CASE("validation: unknown column gets a nearest-match hint") {
    const DataTableSet tables = test::make_tables();
    VisSpec spec;
    spec.chart_type = ChartType::bar;
    spec.table_ref = "t0";
    spec.x = "Yearr";
    spec.y = {"Approval"};
    const Report report = validate_visspec(spec, tables);
    REQUIRE(report.size() == 1);
    CHECK(report[0].code == "unknown_column");
    CHECK(report[0].severity == Severity::error);
    CHECK(report[0].message.find("nearest match 'Year'") != std::string::npos);
    CHECK(report[0].path == "x");
}

TEST_CASE("validation: unresolved table, non-numeric y, negative pie") {
    const DataTableSet tables = test::make_tables();
    VisSpec spec;
    spec.chart_type = ChartType::bar;
    spec.table_ref = "nope";
    spec.x = "Year";
    spec.y = {"Approval"};
    CHECK(validate_visspec(spec, tables)[0].code == "unknown_table");

    spec.table_ref = "t0";
    spec.x = "Approval";
    spec.y = {"Year"};
    bool non_numeric = false;
    for (const auto& issue : validate_visspec(spec, tables))
        if (issue.code == "non_numeric_column") non_numeric = true;
    CHECK(non_numeric);

    DataTableSet negative;
    DataTable t;
    t.id = "t0";
    t.columns = {{"Cat", ColumnKind::text, {}}, {"Val", ColumnKind::number, {}}};
    t.rows = {{std::string("a"), 5.0}, {std::string("b"), -3.0}};
    negative.tables.push_back(t);
    VisSpec pie;
    pie.chart_type = ChartType::pie;
    pie.table_ref = "t0";
    pie.x = "Cat";
    pie.y = {"Val"};
    const Report report = validate_visspec(pie, negative);
    REQUIRE(report.size() == 1);
    CHECK(report[0].code == "negative_pie_value");

    VisSpec stacked = pie;
    stacked.chart_type = ChartType::stacked_bar;
    CHECK(validate_visspec(stacked, negative)[0].code == "negative_stacked_value");
}

TEST_CASE("validation warnings: too many slices, too many series") {
    DataTableSet tables;
    DataTable t;
    t.id = "t0";
    t.columns = {{"Cat", ColumnKind::text, {}}, {"Val", ColumnKind::number, {}}};
    for (int i = 0; i < 13; ++i) t.rows.push_back({std::string(1, char('a' + i)), 1.0 + i});
    tables.tables.push_back(t);
    VisSpec pie;
    pie.chart_type = ChartType::pie;
    pie.table_ref = "t0";
    pie.x = "Cat";
    pie.y = {"Val"};
    const Report report = validate_visspec(pie, tables);
    REQUIRE(report.size() == 1);
    CHECK(report[0].severity == Severity::warning);
    CHECK(report[0].code == "too_many_slices");

    DataTableSet wide;
    DataTable w;
    w.id = "t0";
    w.columns = {{"X", ColumnKind::text, {}}};
    std::vector<std::string> ys;
    for (int i = 0; i < 9; ++i) {
        w.columns.push_back({"Y" + std::to_string(i), ColumnKind::number, {}});
        ys.push_back("Y" + std::to_string(i));
    }
    std::vector<Cell> row{std::string("a")};
    for (int i = 0; i < 9; ++i) row.emplace_back(1.0);
    w.rows.push_back(row);
    wide.tables.push_back(w);
    VisSpec lines;
    lines.chart_type = ChartType::line;
    lines.table_ref = "t0";
    lines.x = "X";
    lines.y = ys;
    bool warned = false;
    for (const auto& issue : validate_visspec(lines, wide))
        if (issue.code == "too_many_series" && issue.severity == Severity::warning)
            warned = true;
    CHECK(warned);

    CHECK_FALSE(has_errors(report));
}

TEST_CASE("fully resolvable bar spec yields an empty report") {
    VisSpec spec;
    spec.chart_type = ChartType::bar;
    spec.table_ref = "t0";
    spec.x = "Year";
    spec.y = {"Approval"};
    CHECK(validate_visspec(spec, test::make_tables()).empty());
}

TEST_CASE("bar render emits one rectangle per row") {
    VisSpec spec;
    spec.title = "three bars";
    spec.chart_type = ChartType::bar;
    spec.table_ref = "t0";
    spec.x = "Year";
    spec.y = {"Approval"};
    const std::string svg = render_svg(spec, test::make_tables());
    CHECK(count_marks(svg, "rect") == 3);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("three bars") != std::string::npos);
    CHECK(svg.find(">Year<") != std::string::npos);      // x axis label
    CHECK(svg.find(">Approval<") != std::string::npos);  // y axis label
}

TEST_CASE("pie over {50, 50} renders two wedges of 180 degrees each") {
    DataTableSet tables;
    DataTable t;
    t.id = "t0";
    t.title = "even split";
    t.columns = {{"Half", ColumnKind::text, {}}, {"Share", ColumnKind::number, {}}};
    t.rows = {{std::string("first"), 50.0}, {std::string("second"), 50.0}};
    tables.tables.push_back(t);
    VisSpec spec;
    spec.chart_type = ChartType::pie;
    spec.table_ref = "t0";
    spec.x = "Half";
    spec.y = {"Share"};
    const std::string svg = render_svg(spec, tables);
    CHECK(count_marks(svg, "path") == 2);

    // each wedge spans 180 degrees: its arc endpoints are antipodal
    size_t pos = 0;
    for (int wedge = 0; wedge < 2; ++wedge) {
        pos = svg.find("<path class=\"mark\" d=\"M ", pos);
        REQUIRE(pos != std::string::npos);
        double cx, cy, x1, y1, r1, r2, x2, y2;
        int large, sweep;
        const char* d = svg.c_str() + pos;
        REQUIRE(std::sscanf(d, "<path class=\"mark\" d=\"M %lf %lf L %lf %lf A %lf %lf 0 %d %d %lf %lf",
                            &cx, &cy, &x1, &y1, &r1, &r2, &large, &sweep, &x2, &y2) == 10);
        constexpr double kPi = 3.14159265358979323846;
        const double a1 = std::atan2(y1 - cy, x1 - cx);
        const double a2 = std::atan2(y2 - cy, x2 - cx);
        double sweep_deg = (a2 - a1) * 180.0 / kPi;
        while (sweep_deg < 0) sweep_deg += 360.0;
        CHECK(sweep_deg == doctest::Approx(180.0).epsilon(0.0001));
        ++pos;
    }
}

TEST_CASE("line with two series and five rows: two polylines of five points") {
    DataTableSet tables = numeric_table(5);
    tables.tables[0].columns[0].kind = ColumnKind::text;
    for (auto& row : tables.tables[0].rows) row[0] = std::string("x");
    VisSpec spec;
    spec.chart_type = ChartType::line;
    spec.table_ref = "t0";
    spec.x = "X";
    spec.y = {"Y", "Z"};
    const std::string svg = render_svg(spec, tables);
    CHECK(count_marks(svg, "polyline") == 2);
    size_t pos = 0;
    for (int series = 0; series < 2; ++series) {
        pos = svg.find("<polyline class=\"mark\" points=\"", pos);
        REQUIRE(pos != std::string::npos);
        const size_t end = svg.find('"', pos + 31);
        const std::string points = svg.substr(pos + 31, end - pos - 31);
        CHECK(count_occurrences(points, ",") == 5);
        ++pos;
    }
}

TEST_CASE("bubble radii scale with the square root of the size column") {
    DataTableSet tables;
    DataTable t;
    t.id = "t0";
    t.columns = {{"X", ColumnKind::number, {}},
                 {"Y", ColumnKind::number, {}},
                 {"Size", ColumnKind::number, {}}};
    t.rows = {{1.0, 1.0, 4.0}, {2.0, 2.0, 16.0}};
    tables.tables.push_back(t);
    VisSpec spec;
    spec.chart_type = ChartType::bubble;
    spec.table_ref = "t0";
    spec.x = "X";
    spec.y = {"Y"};
    spec.series = "Size";
    const std::string svg = render_svg(spec, tables);
    CHECK(count_marks(svg, "circle") == 2);
    std::vector<double> radii;
    size_t pos = 0;
    while ((pos = svg.find(" r=\"", pos)) != std::string::npos) {
        // skip non-mark circles (there are none, but stay safe)
        size_t line_start = svg.rfind('\n', pos);
        if (svg.find("class=\"mark\"", line_start) < pos)
            radii.push_back(std::atof(svg.c_str() + pos + 4));
        pos += 4;
    }
    REQUIRE(radii.size() == 2);
    CHECK(radii[1] / radii[0] == doctest::Approx(2.0).epsilon(0.001));  // sqrt(16/4)
}

TEST_CASE("renderer is byte-deterministic") {
    VisSpec spec;
    spec.chart_type = ChartType::grouped_bar;
    spec.table_ref = "t1";
    spec.x = "Month";
    spec.y = {"Rep", "Dem"};
    const DataTableSet tables = test::make_tables();
    CHECK(render_svg(spec, tables) == render_svg(spec, tables));
}

TEST_CASE("zero rows raise EmptyData") {
    DataTableSet tables = test::make_tables();
    tables.tables[0].rows.clear();
    VisSpec spec;
    spec.chart_type = ChartType::bar;
    spec.table_ref = "t0";
    spec.x = "Year";
    spec.y = {"Approval"};
    try {
        render_svg(spec, tables);
        FAIL("expected EmptyData");
    } catch (const RenderError& e) {
        CHECK(std::string(e.what()).find("EmptyData") != std::string::npos);
    }
}

TEST_CASE("mark-count law holds on randomized small tables") {
    std::mt19937 rng(99);
    for (int iter = 0; iter < 60; ++iter) {
        const size_t rows = 1 + rng() % 6;
        const size_t ycols = 1 + rng() % 3;
        DataTableSet tables;
        DataTable t;
        t.id = "t0";
        t.columns = {{"X", ColumnKind::number, {}}};
        std::vector<std::string> ys;
        for (size_t c = 0; c < ycols; ++c) {
            t.columns.push_back({"Y" + std::to_string(c), ColumnKind::number, {}});
            ys.push_back("Y" + std::to_string(c));
        }
        for (size_t r = 0; r < rows; ++r) {
            std::vector<Cell> row{double(r)};
            for (size_t c = 0; c < ycols; ++c) row.emplace_back(double(rng() % 90 + 1));
            t.rows.push_back(std::move(row));
        }
        tables.tables.push_back(std::move(t));

        VisSpec spec;
        spec.table_ref = "t0";
        spec.x = "X";
        spec.y = ys;

        spec.chart_type = ChartType::bar;
        CHECK(count_marks(render_svg(spec, tables), "rect") == rows * ycols);
        spec.chart_type = ChartType::grouped_bar;
        CHECK(count_marks(render_svg(spec, tables), "rect") == rows * ycols);
        spec.chart_type = ChartType::stacked_bar;
        CHECK(count_marks(render_svg(spec, tables), "rect") == rows * ycols);
        spec.chart_type = ChartType::line;
        CHECK(count_marks(render_svg(spec, tables), "polyline") == ycols);
        spec.chart_type = ChartType::area;
        CHECK(count_marks(render_svg(spec, tables), "path") == ycols);
        spec.chart_type = ChartType::scatter;
        CHECK(count_marks(render_svg(spec, tables), "circle") == rows * ycols);

        VisSpec pie;
        pie.chart_type = ChartType::pie;
        pie.table_ref = "t0";
        pie.x = "X";
        pie.y = {ys[0]};
        const std::string svg = render_svg(pie, tables);
        CHECK(count_marks(svg, "path") + count_marks(svg, "circle") == rows);
    }
}

TEST_CASE("long form: series column pivots rows into groups") {
    DataTableSet tables;
    DataTable t;
    t.id = "t0";
    t.columns = {{"Year", ColumnKind::text, {}},
                 {"Pct", ColumnKind::number, {}},
                 {"Party", ColumnKind::text, {}}};
    t.rows = {{std::string("2010"), 40.0, std::string("Rep")},
              {std::string("2010"), 45.0, std::string("Dem")},
              {std::string("2018"), 59.0, std::string("Rep")},
              {std::string("2018"), 55.0, std::string("Dem")}};
    tables.tables.push_back(t);
    VisSpec spec;
    spec.chart_type = ChartType::grouped_bar;
    spec.table_ref = "t0";
    spec.x = "Year";
    spec.y = {"Pct"};
    spec.series = "Party";
    const std::string svg = render_svg(spec, tables);
    CHECK(count_marks(svg, "rect") == 4);  // one per data point
    CHECK(svg.find(">Rep<") != std::string::npos);  // legend entries
    CHECK(svg.find(">Dem<") != std::string::npos);

    VisSpec line = spec;
    line.chart_type = ChartType::line;
    CHECK(count_marks(render_svg(line, tables), "polyline") == 2);
}
