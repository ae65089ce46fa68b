#pragma once

// Long-format result tables, aggregation, and CSV round-tripping.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "erdlab/errors.hpp"

namespace erdlab::harness {

struct SeriesRow {
    std::string experiment;
    int trial = 0;
    double t = 0.0;
    std::string metric;
    double value = 0.0;
};

struct ScalarRow {
    std::string experiment;
    int trial = 0;
    std::string metric;
    double value = 0.0;
};

struct AggregateRow {
    std::string metric;
    double t = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation across trials (0 for one trial)
};

struct ResultTable {
    std::string experiment;
    std::vector<SeriesRow> series;
    std::vector<ScalarRow> scalars;
    std::vector<std::pair<std::string, std::string>> metadata;

    std::string meta(const std::string& key, const std::string& fallback = "") const {
        for (const auto& [k, v] : metadata)
            if (k == key) return v;
        return fallback;
    }

    /// Values of one scalar metric, in trial order.
    std::vector<double> scalar_values(const std::string& metric) const {
        std::vector<double> out;
        for (const auto& r : scalars)
            if (r.metric == metric) out.push_back(r.value);
        return out;
    }
};

/// Groups series rows by (metric, t) in first-appearance order and averages
/// over trials, accumulating in row order.
inline std::vector<AggregateRow> compute_aggregates(const std::vector<SeriesRow>& rows) {
    std::vector<std::pair<std::string, double>> keys;
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.metric, r.t);
        auto it = groups.find(key);
        if (it == groups.end()) {
            keys.push_back(key);
            groups[key].push_back(r.value);
        } else {
            it->second.push_back(r.value);
        }
    }
    std::vector<AggregateRow> out;
    out.reserve(keys.size());
    for (const auto& key : keys) {
        const auto& vals = groups[key];
        double sum = 0.0;
        for (double v : vals) sum += v;
        const double mean = sum / static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        const double sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
        out.push_back({key.first, key.second, mean, sd});
    }
    return out;
}

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return std::stod(s);
}

inline std::string series_csv(const std::vector<SeriesRow>& rows) {
    std::string out = "experiment,trial,t,metric,value\n";
    for (const auto& r : rows)
        out += r.experiment + "," + std::to_string(r.trial) + "," + fmt17(r.t) + "," + r.metric + "," +
               fmt17(r.value) + "\n";
    return out;
}

inline std::string scalars_csv(const std::vector<ScalarRow>& rows) {
    std::string out = "experiment,trial,metric,value\n";
    for (const auto& r : rows)
        out += r.experiment + "," + std::to_string(r.trial) + "," + r.metric + "," + fmt17(r.value) + "\n";
    return out;
}

inline std::string aggregates_csv(const std::vector<AggregateRow>& rows) {
    std::string out = "metric,t,mean,std\n";
    for (const auto& r : rows) out += r.metric + "," + fmt17(r.t) + "," + fmt17(r.mean) + "," + fmt17(r.stddev) + "\n";
    return out;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::string& expected_header) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != expected_header)
        throw SpecError("unexpected CSV header '" + line + "' (wanted '" + expected_header + "')");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline std::vector<SeriesRow> parse_series_csv(const std::string& text) {
    std::vector<SeriesRow> out;
    for (const auto& c : parse_csv(text, "experiment,trial,t,metric,value")) {
        if (c.size() != 5) throw SpecError("malformed series row");
        out.push_back({c[0], std::stoi(c[1]), parse_double(c[2]), c[3], parse_double(c[4])});
    }
    return out;
}

inline std::vector<ScalarRow> parse_scalars_csv(const std::string& text) {
    std::vector<ScalarRow> out;
    for (const auto& c : parse_csv(text, "experiment,trial,metric,value")) {
        if (c.size() != 4) throw SpecError("malformed scalar row");
        out.push_back({c[0], std::stoi(c[1]), c[2], parse_double(c[3])});
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SpecError("cannot write '" + path + "'");
    out << content;
    if (!out) throw SpecError("write to '" + path + "' failed");
}

}  // namespace erdlab::harness
