#include "dn/table.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace dn {

const char* to_string(ColumnKind kind) {
    return kind == ColumnKind::number ? "number" : "text";
}

bool cell_is_number(const Cell& cell) {
    return std::holds_alternative<double>(cell);
}

double cell_number(const Cell& cell) {
    return std::get<double>(cell);
}

std::string cell_text(const Cell& cell) {
    if (const auto* s = std::get_if<std::string>(&cell)) return *s;
    double v = std::get<double>(cell);
    if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

const Column* DataTable::find_column(const std::string& name) const {
    for (const auto& c : columns)
        if (c.name == name) return &c;
    return nullptr;
}

int DataTable::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return static_cast<int>(i);
    return -1;
}

const DataTable* DataTableSet::find_table(const std::string& id) const {
    for (const auto& t : tables)
        if (t.id == id) return &t;
    return nullptr;
}

TableValidationReport validate_table_set(const DataTableSet& set) {
    TableValidationReport report;
    auto add = [&](std::string table_id, std::string where, std::string rule, std::string message) {
        report.push_back({std::move(table_id), std::move(where), std::move(rule), std::move(message)});
    };

    if (set.tables.empty()) {
        add("", "", "empty table set", "a DataTableSet must contain at least one table");
        return report;
    }

    std::set<std::string> seen_ids;
    for (const auto& table : set.tables) {
        if (table.id.empty())
            add(table.id, "", "empty table id", "table id must be non-empty");
        else if (!seen_ids.insert(table.id).second)
            add(table.id, "", "duplicate table id", "table id '" + table.id + "' used more than once");

        std::set<std::string> seen_cols;
        for (const auto& col : table.columns) {
            if (col.name.empty())
                add(table.id, "column ''", "empty column name", "column name must be non-empty");
            else if (!seen_cols.insert(col.name).second)
                add(table.id, "column '" + col.name + "'", "duplicate column",
                    "column name '" + col.name + "' duplicated in table '" + table.id + "'");
        }

        const size_t ncols = table.columns.size();
        for (size_t r = 0; r < table.rows.size(); ++r) {
            const auto& row = table.rows[r];
            const std::string where = "row " + std::to_string(r);
            if (row.size() != ncols) {
                add(table.id, where, "row length mismatch",
                    "row has " + std::to_string(row.size()) + " cells, expected " +
                        std::to_string(ncols));
                continue;
            }
            for (size_t c = 0; c < row.size(); ++c) {
                const auto& cell = row[c];
                const auto& col = table.columns[c];
                const std::string cell_where = where + ", column '" + col.name + "'";
                if (cell_is_number(cell) && !std::isfinite(cell_number(cell))) {
                    add(table.id, cell_where, "non-finite number",
                        "numeric cells must be finite");
                    continue;
                }
                if (col.kind == ColumnKind::number && !cell_is_number(cell)) {
                    add(table.id, cell_where, "cell type mismatch",
                        "text cell '" + cell_text(cell) + "' in number column");
                } else if (col.kind == ColumnKind::text && cell_is_number(cell)) {
                    add(table.id, cell_where, "cell type mismatch",
                        "numeric cell in text column");
                }
            }
        }
    }
    return report;
}

}  // namespace dn
