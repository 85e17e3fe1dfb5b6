// export.hpp — Deterministic CSV/JSON result writers
//
// CSV rows print every value in fixed scientific notation with 9 significant
// digits and LF line endings, so identical runs produce identical bytes. A
// non-finite value anywhere refuses the export and names the offending row.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vapormem/errors.hpp"

namespace vapormem::harness {

struct ResultTable {
    std::vector<std::string> columns; // unit-annotated names, e.g. delta_hz
    std::vector<std::vector<double>> rows;
};

namespace detail_exp {

inline std::string format_value(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.8e", x);
    return buf;
}

inline void check_finite(const ResultTable& table) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.columns.size())
            throw physics_error("export: row " + std::to_string(r) + " has wrong width");
        for (std::size_t c = 0; c < table.rows[r].size(); ++c) {
            if (!std::isfinite(table.rows[r][c])) {
                const std::string at =
                    table.rows[r].empty()
                        ? std::to_string(r)
                        : std::to_string(r) + " (" + table.columns[0] + " = " +
                              format_value(table.rows[r][0]) + ")";
                throw physics_error("export: non-finite value in column '" + table.columns[c] +
                                    "' at row " + at);
            }
        }
    }
}

} // namespace detail_exp

inline void export_csv(const ResultTable& table, const std::string& path) {
    detail_exp::check_finite(table);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << (c ? "," : "") << table.columns[c];
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << detail_exp::format_value(row[c]);
        out << "\n";
    }
    if (!out) throw io_error("write failed: " + path);
}

// Results JSON: config snapshot + column arrays. Timing and file lists stay in
// the separate manifest so this file is byte-stable across identical runs.
inline void export_json(const ResultTable& table, const nlohmann::ordered_json& header,
                        const std::string& path) {
    detail_exp::check_finite(table);
    nlohmann::ordered_json doc = header;
    doc["columns"] = table.columns;
    auto& rows = doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json jrow = nlohmann::ordered_json::array();
        for (double x : row) jrow.push_back(detail_exp::format_value(x));
        rows.push_back(std::move(jrow));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw io_error("write failed: " + path);
}

} // namespace vapormem::harness
