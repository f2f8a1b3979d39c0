#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace bbm {

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::vector<Cell>& add_row() {
        rows.emplace_back();
        return rows.back();
    }
};

// One cell rendered the way write_csv prints it (doubles at 17 significant
// digits, so reparsing is bit-exact).
std::string format_cell(const Cell& cell);

// RFC-4180-style CSV: header always present, LF newlines, quoting only where
// needed. Written atomically (temp file + rename).
void write_csv(const Table& table, const std::string& path);

std::string to_csv(const Table& table);

} // namespace bbm
