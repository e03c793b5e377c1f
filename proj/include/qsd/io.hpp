#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsd/errors.hpp"
#include "qsd/histogram.hpp"
#include "qsd/hypotheses.hpp"

namespace qsd::io {

/// Shortest round-trippable decimal form; keeps CSV output byte-stable.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_density_csv(const std::string& path, const Histogram& h) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "bin_left,bin_right,density\n";
    for (std::size_t i = 0; i < h.bins(); ++i) {
        f << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ','
          << format_double(h.density(i)) << '\n';
    }
    if (!f) throw IoError("failed while writing " + path);
}

inline Histogram read_density_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError(path + ": empty file");
    if (line.ends_with("\r")) line.pop_back();
    if (line != "bin_left,bin_right,density") {
        throw IoError(path + ": expected header 'bin_left,bin_right,density'");
    }
    std::vector<double> edges;
    std::vector<double> masses;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        double l = 0.0, r = 0.0, d = 0.0;
        char c1 = 0, c2 = 0;
        if (!(row >> l >> c1 >> r >> c2 >> d) || c1 != ',' || c2 != ',') {
            throw IoError(path + ":" + std::to_string(lineno) + ": malformed row");
        }
        if (!(r > l)) throw IoError(path + ":" + std::to_string(lineno) + ": bin_right <= bin_left");
        if (edges.empty()) {
            edges.push_back(l);
        } else if (std::abs(edges.back() - l) > 1e-9 * (r - l)) {
            throw IoError(path + ":" + std::to_string(lineno) + ": bins are not contiguous");
        }
        edges.push_back(r);
        masses.push_back(d * (r - l));
    }
    if (masses.empty()) throw IoError(path + ": no bins");
    return make_histogram(std::move(edges), std::move(masses));
}

inline void write_grid_csv(const std::string& path, const std::vector<double>& grid,
                           const std::vector<double>& v, const std::vector<double>& density) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "grid,v,density\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        f << format_double(grid[i]) << ',' << format_double(v[i]) << ','
          << format_double(density[i]) << '\n';
    }
    if (!f) throw IoError("failed while writing " + path);
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << j.dump(2) << '\n';
    if (!f) throw IoError("failed while writing " + path);
}

inline nlohmann::json hypothesis_report_json(const HypothesisReport& rep) {
    nlohmann::json out;
    out["model"] = rep.model_id;
    out["hypotheses"] = nlohmann::json::array();
    for (const auto& e : rep.entries) {
        nlohmann::json entry;
        entry["hypothesis"] = e.name;
        entry["verdict"] = to_string(e.verdict);
        entry["witness_values"] = e.witnesses;
        entry["grid"] = e.grid;
        out["hypotheses"].push_back(std::move(entry));
    }
    return out;
}

}  // namespace qsd::io
