#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dn {

enum class ColumnKind { text, number };

const char* to_string(ColumnKind kind);

/// Either free text or a finite number. Per-column typing is enforced by
/// validate_table_set, not by the cell itself.
using Cell = std::variant<std::string, double>;

bool cell_is_number(const Cell& cell);
double cell_number(const Cell& cell);
/// Text cells verbatim; numeric cells formatted (integers without decimals).
std::string cell_text(const Cell& cell);

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::text;
    std::optional<std::string> unit;  // e.g. "%" for Pew-style percentage columns
};

struct DataTable {
    std::string id;
    std::string title;
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
    std::optional<std::string> source_note;

    const Column* find_column(const std::string& name) const;
    int column_index(const std::string& name) const;  // -1 when absent
};

struct DataTableSet {
    std::vector<DataTable> tables;

    const DataTable* find_table(const std::string& id) const;
};

struct TableViolation {
    std::string table_id;  // empty for set-level violations
    std::string where;     // "row 3", "column 'Year'", ...
    std::string rule;      // stable rule id, e.g. "row length mismatch"
    std::string message;
};

using TableValidationReport = std::vector<TableViolation>;

/// Checks every DataTableSet invariant and reports one entry per breakage.
/// An empty report means the set is valid. Pure: never throws, never mutates.
TableValidationReport validate_table_set(const DataTableSet& tables);

}  // namespace dn
