#pragma once

// CSV and JSON writers. CSV: comma separated, 17 significant digits, LF only.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qomsim/core.hpp"

namespace qomsim::cli {

inline constexpr double kCsvCeiling = 1e300;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::vector<double> r) {
        if (r.size() != columns.size()) throw NumericalError("table row has the wrong width");
        rows.push_back(std::move(r));
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (std::size_t c = 0; c < columns.size(); ++c) {
            nlohmann::json col = nlohmann::json::array();
            for (const auto& r : rows) col.push_back(clip(r[c]));
            j[columns[c]] = col;
        }
        return j;
    }

    // infinities become +-1e300 so every cell stays a number
    static double clip(double v) {
        if (std::isnan(v)) throw NumericalError("NaN in output table");
        if (v > kCsvCeiling) return kCsvCeiling;
        if (v < -kCsvCeiling) return -kCsvCeiling;
        return v;
    }
};

inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", Table::clip(v));
    return buf;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    f << content;
    if (!f) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline void write_csv(const std::filesystem::path& p, const Table& t) {
    std::string s;
    for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c];
    s += '\n';
    for (const auto& r : t.rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c) s += ',';
            s += csv_number(r[c]);
        }
        s += '\n';
    }
    write_file(p, s);
}

// JSON cannot carry inf; clip the same way as CSV.
inline nlohmann::json num(double v) { return Table::clip(v); }

inline nlohmann::json cov_json(const Covariance& V) {
    return {{"V_xx", num(V.xx)}, {"V_xp", num(V.xp)}, {"V_pp", num(V.pp)}};
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_file(p, j.dump(2) + "\n"); }

}  // namespace qomsim::cli
