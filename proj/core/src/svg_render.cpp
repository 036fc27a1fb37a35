#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dn/strings.hpp"
#include "dn/visspec.hpp"

namespace dn::visspec {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string esc(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

const std::vector<std::string>& default_palette() {
    static const std::vector<std::string> kPalette = {
        "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
        "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
    };
    return kPalette;
}

struct Point {
    size_t category = 0;  // index into categories (band charts)
    double x = 0;         // numeric x (scatter/bubble)
    double y = 0;
    double size = 0;  // bubble only
};

struct Series {
    std::string name;
    std::vector<Point> points;
};

struct PlotData {
    std::vector<std::string> categories;  // band-scale x labels, row order
    std::vector<Series> series;
};

double numeric_cell(const DataTable& table, const std::vector<Cell>& row, int col) {
    const Cell& cell = row[static_cast<size_t>(col)];
    if (!cell_is_number(cell))
        throw RenderError("non-numeric cell in column '" +
                          table.columns[static_cast<size_t>(col)].name + "'");
    return cell_number(cell);
}

// Normalizes both input shapes into per-series point lists: wide form (one
// series per y column) and long form (single y column pivoted by the series
// column, categories and series in first-appearance order).
PlotData build_plot_data(const VisSpec& spec, const DataTable& table) {
    PlotData data;
    const int xcol = table.column_index(spec.x);

    if (spec.chart_type == ChartType::bubble) {
        Series s;
        s.name = spec.y[0];
        const int ycol = table.column_index(spec.y[0]);
        const int scol = table.column_index(*spec.series);
        for (const auto& row : table.rows) {
            Point p;
            p.x = numeric_cell(table, row, xcol);
            p.y = numeric_cell(table, row, ycol);
            p.size = numeric_cell(table, row, scol);
            s.points.push_back(p);
        }
        data.series.push_back(std::move(s));
        return data;
    }

    const bool long_form = spec.series.has_value() && spec.y.size() == 1;
    if (long_form) {
        const int ycol = table.column_index(spec.y[0]);
        const int scol = table.column_index(*spec.series);
        std::map<std::string, size_t> cat_index;
        std::map<std::string, size_t> series_index;
        for (const auto& row : table.rows) {
            const std::string cat = cell_text(row[static_cast<size_t>(xcol)]);
            if (!cat_index.count(cat)) {
                cat_index[cat] = data.categories.size();
                data.categories.push_back(cat);
            }
            const std::string sname = cell_text(row[static_cast<size_t>(scol)]);
            if (!series_index.count(sname)) {
                series_index[sname] = data.series.size();
                data.series.push_back({sname, {}});
            }
            Point p;
            p.category = cat_index[cat];
            p.x = cell_is_number(row[static_cast<size_t>(xcol)])
                      ? cell_number(row[static_cast<size_t>(xcol)])
                      : static_cast<double>(p.category);
            p.y = numeric_cell(table, row, ycol);
            data.series[series_index[sname]].points.push_back(p);
        }
        return data;
    }

    for (const auto& row : table.rows)
        data.categories.push_back(cell_text(row[static_cast<size_t>(xcol)]));
    for (const auto& ycol_name : spec.y) {
        Series s;
        s.name = ycol_name;
        const int ycol = table.column_index(ycol_name);
        for (size_t r = 0; r < table.rows.size(); ++r) {
            Point p;
            p.category = r;
            p.x = cell_is_number(table.rows[r][static_cast<size_t>(xcol)])
                      ? cell_number(table.rows[r][static_cast<size_t>(xcol)])
                      : static_cast<double>(r);
            p.y = numeric_cell(table, table.rows[r], ycol);
            s.points.push_back(p);
        }
        data.series.push_back(std::move(s));
    }
    return data;
}

struct Frame {
    double left, top, width, height;  // plot rectangle
    double ylo, yhi;
    double xlo = 0, xhi = 1;  // numeric x charts only

    double sy(double v) const {
        if (yhi == ylo) return top + height / 2;
        return top + (yhi - v) / (yhi - ylo) * height;
    }
    double sx(double v) const {
        if (xhi == xlo) return left + width / 2;
        return left + (v - xlo) / (xhi - xlo) * width;
    }
    double band_width(size_t n) const { return n ? width / static_cast<double>(n) : width; }
    double band_center(size_t i, size_t n) const {
        return left + (static_cast<double>(i) + 0.5) * band_width(n);
    }
};

void y_extent(const PlotData& data, bool stacked, double& lo, double& hi) {
    lo = 0;
    hi = 0;
    bool first = true;
    if (stacked) {
        std::map<size_t, double> sums;
        for (const auto& s : data.series)
            for (const auto& p : s.points) sums[p.category] += p.y;
        for (const auto& [cat, sum] : sums) {
            if (first || sum < lo) lo = sum;
            if (first || sum > hi) hi = sum;
            first = false;
        }
    } else {
        for (const auto& s : data.series)
            for (const auto& p : s.points) {
                if (first || p.y < lo) lo = p.y;
                if (first || p.y > hi) hi = p.y;
                first = false;
            }
    }
}

void append_axes(std::string& svg, const Frame& f, const std::string& x_name,
                 const std::string& y_name) {
    // Horizontal gridlines and y tick labels at 5 evenly spaced values.
    for (int i = 0; i < 5; ++i) {
        double v = f.ylo + (f.yhi - f.ylo) * i / 4.0;
        double y = f.sy(v);
        svg += "<line class=\"grid\" x1=\"" + num(f.left) + "\" y1=\"" + num(y) + "\" x2=\"" +
               num(f.left + f.width) + "\" y2=\"" + num(y) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<text class=\"tick\" x=\"" + num(f.left - 6) + "\" y=\"" + num(y + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + esc(tick_label(v)) + "</text>\n";
    }
    svg += "<line class=\"axis\" x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" +
           num(f.left) + "\" y2=\"" + num(f.top + f.height) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<line class=\"axis\" x1=\"" + num(f.left) + "\" y1=\"" + num(f.top + f.height) +
           "\" x2=\"" + num(f.left + f.width) + "\" y2=\"" + num(f.top + f.height) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<text class=\"axis-label\" x=\"" + num(f.left + f.width / 2) + "\" y=\"" +
           num(f.top + f.height + 30) + "\" text-anchor=\"middle\" font-size=\"12\">" +
           esc(x_name) + "</text>\n";
    svg += "<text class=\"axis-label\" x=\"14\" y=\"" + num(f.top + f.height / 2) +
           "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
           num(f.top + f.height / 2) + ")\">" + esc(y_name) + "</text>\n";
}

void append_category_labels(std::string& svg, const Frame& f,
                            const std::vector<std::string>& categories) {
    if (categories.empty()) return;
    const size_t step = categories.size() <= 16 ? 1 : (categories.size() + 15) / 16;
    for (size_t i = 0; i < categories.size(); i += step) {
        double x = f.band_center(i, categories.size());
        svg += "<text class=\"tick\" x=\"" + num(x) + "\" y=\"" + num(f.top + f.height + 16) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + esc(categories[i]) + "</text>\n";
    }
}

void append_x_ticks(std::string& svg, const Frame& f) {
    for (int i = 0; i < 5; ++i) {
        double v = f.xlo + (f.xhi - f.xlo) * i / 4.0;
        double x = f.sx(v);
        svg += "<text class=\"tick\" x=\"" + num(x) + "\" y=\"" + num(f.top + f.height + 16) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + esc(tick_label(v)) + "</text>\n";
    }
}

void append_legend(std::string& svg, const std::vector<std::string>& names,
                   const std::vector<std::string>& palette, double x, double top) {
    for (size_t i = 0; i < names.size(); ++i) {
        double y = top + static_cast<double>(i) * 18.0;
        svg += "<rect class=\"legend\" x=\"" + num(x) + "\" y=\"" + num(y) +
               "\" width=\"12\" height=\"12\" fill=\"" + palette[i % palette.size()] + "\"/>\n";
        svg += "<text class=\"legend\" x=\"" + num(x + 16) + "\" y=\"" + num(y + 10) +
               "\" font-size=\"11\">" + esc(names[i]) + "</text>\n";
    }
}

std::string wedge_path(double cx, double cy, double r, double start_deg, double sweep_deg) {
    const double a0 = (start_deg - 90.0) * kPi / 180.0;
    const double a1 = (start_deg + sweep_deg - 90.0) * kPi / 180.0;
    const double x1 = cx + r * std::cos(a0);
    const double y1 = cy + r * std::sin(a0);
    const double x2 = cx + r * std::cos(a1);
    const double y2 = cy + r * std::sin(a1);
    const int large = sweep_deg > 180.0 ? 1 : 0;
    return "M " + num(cx) + " " + num(cy) + " L " + num(x1) + " " + num(y1) + " A " + num(r) +
           " " + num(r) + " 0 " + std::to_string(large) + " 1 " + num(x2) + " " + num(y2) + " Z";
}

}  // namespace

std::string render_svg(const VisSpec& spec, const DataTableSet& tables,
                       const RenderOptions& opts) {
    Report report = validate_visspec(spec, tables);
    if (has_errors(report))
        throw RenderError("spec failed validation: " + report.front().message);
    const DataTable& table = *tables.find_table(spec.table_ref);
    if (table.rows.empty()) throw RenderError("EmptyData: table '" + table.id + "' has no rows");

    const PlotData data = build_plot_data(spec, table);
    const std::vector<std::string>& palette =
        opts.palette.empty() ? default_palette() : opts.palette;
    const double W = opts.width;
    const double H = opts.height;

    const bool is_pie = spec.chart_type == ChartType::pie;
    const bool with_legend = is_pie || data.series.size() > 1;

    Frame f;
    f.left = 56;
    f.top = 34;
    f.width = W - f.left - (with_legend ? 140.0 : 20.0);
    f.height = H - f.top - 44;

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           std::to_string(opts.width) + "\" height=\"" + std::to_string(opts.height) +
           "\" viewBox=\"0 0 " + std::to_string(opts.width) + " " + std::to_string(opts.height) +
           "\" font-family=\"sans-serif\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(opts.width) + "\" height=\"" +
           std::to_string(opts.height) + "\" fill=\"#ffffff\"/>\n";
    const std::string title = spec.title.empty() ? table.title : spec.title;
    svg += "<text class=\"title\" x=\"" + num(W / 2) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" font-weight=\"bold\">" +
           esc(title) + "</text>\n";

    const std::string y_axis_name = join(spec.y, ", ");

    switch (spec.chart_type) {
        case ChartType::bar:
        case ChartType::grouped_bar: {
            double lo, hi;
            y_extent(data, false, lo, hi);
            f.ylo = std::min(0.0, lo * 1.05);
            f.yhi = std::max(0.0, hi * 1.05);
            if (f.yhi == f.ylo) f.yhi = f.ylo + 1;
            append_axes(svg, f, spec.x, y_axis_name);
            append_category_labels(svg, f, data.categories);
            const size_t ncat = data.categories.size();
            const size_t nser = data.series.size();
            const double band = f.band_width(ncat);
            const double slot = band / static_cast<double>(nser);
            const double bar_w = slot * 0.8;
            const double base = f.sy(0.0);
            for (size_t s = 0; s < nser; ++s) {
                const std::string& color = palette[s % palette.size()];
                for (const auto& p : data.series[s].points) {
                    double cx = f.left + static_cast<double>(p.category) * band +
                                (static_cast<double>(s) + 0.5) * slot;
                    double top = f.sy(std::max(p.y, 0.0));
                    double h = std::fabs(base - f.sy(p.y));
                    svg += "<rect class=\"mark\" x=\"" + num(cx - bar_w / 2) + "\" y=\"" +
                           num(top) + "\" width=\"" + num(bar_w) + "\" height=\"" + num(h) +
                           "\" fill=\"" + color + "\"/>\n";
                }
            }
            break;
        }
        case ChartType::stacked_bar: {
            double lo, hi;
            y_extent(data, true, lo, hi);
            f.ylo = 0;
            f.yhi = std::max(0.0, hi * 1.05);
            if (f.yhi == f.ylo) f.yhi = 1;
            append_axes(svg, f, spec.x, y_axis_name);
            append_category_labels(svg, f, data.categories);
            const size_t ncat = data.categories.size();
            const double band = f.band_width(ncat);
            const double bar_w = band * 0.6;
            std::vector<double> stack(ncat, 0.0);
            for (size_t s = 0; s < data.series.size(); ++s) {
                const std::string& color = palette[s % palette.size()];
                for (const auto& p : data.series[s].points) {
                    double y0 = stack[p.category];
                    double y1 = y0 + p.y;
                    stack[p.category] = y1;
                    double cx = f.band_center(p.category, ncat);
                    svg += "<rect class=\"mark\" x=\"" + num(cx - bar_w / 2) + "\" y=\"" +
                           num(f.sy(y1)) + "\" width=\"" + num(bar_w) + "\" height=\"" +
                           num(f.sy(y0) - f.sy(y1)) + "\" fill=\"" + color + "\"/>\n";
                }
            }
            break;
        }
        case ChartType::line:
        case ChartType::area: {
            double lo, hi;
            y_extent(data, false, lo, hi);
            double pad = (hi - lo) * 0.05;
            if (pad == 0) pad = std::max(1.0, std::fabs(hi) * 0.05);
            f.ylo = lo - pad;
            f.yhi = hi + pad;
            append_axes(svg, f, spec.x, y_axis_name);
            append_category_labels(svg, f, data.categories);
            const size_t ncat = data.categories.size();
            for (size_t s = 0; s < data.series.size(); ++s) {
                const std::string& color = palette[s % palette.size()];
                if (spec.chart_type == ChartType::line) {
                    std::string points;
                    for (const auto& p : data.series[s].points) {
                        if (!points.empty()) points += " ";
                        points += num(f.band_center(p.category, ncat)) + "," + num(f.sy(p.y));
                    }
                    svg += "<polyline class=\"mark\" points=\"" + points +
                           "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
                } else {
                    const double base = f.sy(f.ylo);
                    std::string d;
                    const auto& pts = data.series[s].points;
                    for (size_t i = 0; i < pts.size(); ++i) {
                        const std::string x = num(f.band_center(pts[i].category, ncat));
                        if (i == 0) d += "M " + x + " " + num(base) + " ";
                        d += "L " + x + " " + num(f.sy(pts[i].y)) + " ";
                    }
                    if (!pts.empty())
                        d += "L " + num(f.band_center(pts.back().category, ncat)) + " " +
                             num(base) + " Z";
                    svg += "<path class=\"mark\" d=\"" + d + "\" fill=\"" + color +
                           "\" fill-opacity=\"0.45\" stroke=\"" + color +
                           "\" stroke-width=\"1.5\"/>\n";
                }
            }
            break;
        }
        case ChartType::pie: {
            double total = 0;
            for (const auto& p : data.series[0].points) total += p.y;
            const double cx = f.left + f.width / 2;
            const double cy = f.top + f.height / 2;
            const double r = std::min(f.width, f.height) * 0.42;
            if (total <= 0) {
                svg += "<text class=\"note\" x=\"" + num(cx) + "\" y=\"" + num(cy) +
                       "\" text-anchor=\"middle\" font-size=\"12\">all values are zero</text>\n";
            } else {
                double angle = 0;
                for (size_t i = 0; i < data.series[0].points.size(); ++i) {
                    const auto& p = data.series[0].points[i];
                    const double sweep = 360.0 * p.y / total;
                    const std::string& color = palette[i % palette.size()];
                    if (sweep >= 359.999) {
                        svg += "<circle class=\"mark\" cx=\"" + num(cx) + "\" cy=\"" + num(cy) +
                               "\" r=\"" + num(r) + "\" fill=\"" + color + "\"/>\n";
                    } else if (sweep > 0) {
                        svg += "<path class=\"mark\" d=\"" + wedge_path(cx, cy, r, angle, sweep) +
                               "\" fill=\"" + color + "\"/>\n";
                    } else {
                        // zero-value slice still counts as a mark, drawn as a zero-length wedge
                        svg += "<path class=\"mark\" d=\"" + wedge_path(cx, cy, r, angle, 0.0) +
                               "\" fill=\"" + color + "\"/>\n";
                    }
                    angle += sweep;
                }
            }
            break;
        }
        case ChartType::scatter:
        case ChartType::bubble: {
            double lo, hi;
            y_extent(data, false, lo, hi);
            double pad = (hi - lo) * 0.05;
            if (pad == 0) pad = std::max(1.0, std::fabs(hi) * 0.05);
            f.ylo = lo - pad;
            f.yhi = hi + pad;
            double xmin = 0, xmax = 0;
            bool first = true;
            for (const auto& s : data.series)
                for (const auto& p : s.points) {
                    if (first || p.x < xmin) xmin = p.x;
                    if (first || p.x > xmax) xmax = p.x;
                    first = false;
                }
            double xpad = (xmax - xmin) * 0.05;
            if (xpad == 0) xpad = std::max(1.0, std::fabs(xmax) * 0.05);
            f.xlo = xmin - xpad;
            f.xhi = xmax + xpad;
            append_axes(svg, f, spec.x, y_axis_name);
            append_x_ticks(svg, f);
            double size_max = 0;
            if (spec.chart_type == ChartType::bubble)
                for (const auto& p : data.series[0].points) size_max = std::max(size_max, p.size);
            for (size_t s = 0; s < data.series.size(); ++s) {
                const std::string& color = palette[s % palette.size()];
                for (const auto& p : data.series[s].points) {
                    double radius = 4.0;
                    if (spec.chart_type == ChartType::bubble)
                        radius = size_max > 0 ? 18.0 * std::sqrt(p.size / size_max) : 0.0;
                    svg += "<circle class=\"mark\" cx=\"" + num(f.sx(p.x)) + "\" cy=\"" +
                           num(f.sy(p.y)) + "\" r=\"" + num(radius) + "\" fill=\"" + color +
                           "\" fill-opacity=\"0.75\"/>\n";
                }
            }
            break;
        }
    }

    if (with_legend) {
        std::vector<std::string> names;
        if (is_pie)
            for (const auto& p : table.rows)
                names.push_back(cell_text(p[static_cast<size_t>(table.column_index(spec.x))]));
        else
            for (const auto& s : data.series) names.push_back(s.name);
        append_legend(svg, names, palette, f.left + f.width + 16, f.top + 4);
    }

    svg += "</svg>\n";
    return svg;
}

}  // namespace dn::visspec
