#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace memlab {

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "config_hash",   "seed",           "replicate",
        "d",             "q",              "m",
        "eta",           "activation",     "sign_mode",
        "gradient_mode", "memorization_rate", "min_margin",
        "mean_margin",   "margin_over_logd", "active_count",
        "max_pre_h",     "pre_h_ratio",    "spec_norm_eta_G",
        "row_norm_max",  "gtilde_row_norm_max", "runtime_ms",
        "error"};
    return cols;
}

inline std::string csv_header() {
    std::string h;
    for (const auto& c : csv_columns()) {
        if (!h.empty()) h += ',';
        h += c;
    }
    return h;
}

inline std::string csv_row(const ReplicateRow& r) {
    const auto f = detail::format_double;
    std::string s;
    s += r.config_hash;
    s += ',' + std::to_string(r.seed);
    s += ',' + std::to_string(r.replicate);
    s += ',' + std::to_string(r.d);
    s += ',' + std::to_string(r.q);
    s += ',' + std::to_string(r.m);
    s += ',' + f(r.eta);
    s += ',' + r.activation;
    s += ',' + r.sign_mode;
    s += ',' + r.gradient_mode;
    s += ',' + f(r.memorization_rate);
    s += ',' + f(r.min_margin);
    s += ',' + f(r.mean_margin);
    s += ',' + f(r.margin_over_logd);
    s += ',' + std::to_string(r.active_count);
    s += ',' + f(r.max_pre_h);
    s += ',' + f(r.pre_h_ratio);
    s += ',' + f(r.spec_norm_eta_G);
    s += ',' + f(r.row_norm_max);
    s += ',' + f(r.gtilde_row_norm_max);
    s += ',' + f(r.runtime_ms);
    s += ',' + r.error;
    return s;
}

inline void write_csv(std::ostream& os, const std::vector<ReplicateRow>& rows) {
    os << csv_header() << '\n';
    for (const auto& r : rows) os << csv_row(r) << '\n';
}

inline void write_csv_file(const std::string& path, const std::vector<ReplicateRow>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CsvError("cannot open for writing: " + path);
    write_csv(os, rows);
    if (!os) throw CsvError("write failed: " + path);
}

/// Column-oriented view of a results file, as written by write_csv.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> cells;  // cells[row][col]

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw CsvError("no such column: " + name);
    }

    std::vector<double> numeric_column(const std::string& name) const {
        const std::size_t idx = column_index(name);
        std::vector<double> out;
        out.reserve(cells.size());
        for (std::size_t r = 0; r < cells.size(); ++r) {
            const std::string& s = cells[r][idx];
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw CsvError("column " + name + " is not numeric at row " +
                               std::to_string(r) + ": '" + s + "'");
            out.push_back(v);
        }
        return out;
    }
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw CsvError("empty csv input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::string rest = line;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = rest.find(',', pos);
            if (comma == std::string::npos) {
                row.push_back(rest.substr(pos));
                break;
            }
            row.push_back(rest.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (row.size() != t.columns.size())
            throw CsvError("row has " + std::to_string(row.size()) + " cells, header has " +
                           std::to_string(t.columns.size()));
        t.cells.push_back(std::move(row));
    }
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CsvError("cannot open for reading: " + path);
    return read_csv(is);
}

} // namespace memlab
