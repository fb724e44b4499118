#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/config.hpp"
#include "elastoscan/errors.hpp"
#include "elastoscan/ntd.hpp"
#include "elastoscan/pipeline.hpp"

namespace elastoscan {

namespace detail {

// Shortest decimal form that round-trips a double exactly.
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_field(const std::string& text, const std::string& where) {
    const char* s = text.c_str();
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw SchemaError(where + ": bad number '" + text + "'");
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// NtD matrix files: "elastoscan-ntd v1" with omega/size/tag metadata followed
// by one "row" line per matrix row, full-precision decimals, row-major.

inline void write_ntd_matrix(const std::string& path, const NtDMatrix& L) {
    if (L.entries.rows() != L.entries.cols())
        throw DimensionError("NtD matrix must be square");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "elastoscan-ntd v1\n";
    out << "omega " << detail::format_full(L.omega) << "\n";
    out << "size " << L.entries.rows() << "\n";
    if (!L.material_tag.empty()) out << "tag " << L.material_tag << "\n";
    for (Eigen::Index i = 0; i < L.entries.rows(); ++i) {
        out << "row";
        for (Eigen::Index j = 0; j < L.entries.cols(); ++j)
            out << ' ' << detail::format_full(L.entries(i, j));
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

inline NtDMatrix read_ntd_matrix(const std::string& path) {
    ConfigDoc doc = load_config(path, "ntd");
    NtDMatrix L;
    L.omega = doc.scalar("omega");
    L.material_tag = doc.text_or("tag", "");
    int n = static_cast<int>(doc.scalar("size"));
    if (n < 1) throw SchemaError(path + ": size must be >= 1");

    auto rows = doc.all("row");
    if (static_cast<int>(rows.size()) != n)
        throw SchemaError(path + ": expected " + std::to_string(n) + " row lines, found " +
                          std::to_string(rows.size()));
    L.entries.resize(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].values.size()) != n)
            throw SchemaError(path + ":" + std::to_string(rows[i].line_no) + ": expected " +
                              std::to_string(n) + " entries per row");
        for (int j = 0; j < n; ++j)
            L.entries(i, j) = detail::parse_field(rows[i].values[j],
                                                  path + ":" + std::to_string(rows[i].line_no));
    }
    return L;
}

// ---------------------------------------------------------------------------
// Sweep recordings. CSV with a shared time column, driving forces in newtons
// under "force_<patch>_<axis>" and sensor displacements in metres under
// "disp_<sensor>". Channel order is preserved.

struct SweepCsv {
    std::vector<double> time;
    std::vector<std::string> force_names;   // full column names
    std::vector<std::vector<double>> force;
    std::vector<std::string> sensor_names;  // bare sensor ids
    std::vector<std::vector<double>> displacement;
};

// "force_<patch>_<axis>" -> load label "<patch>:<axis>".
inline std::string force_channel_label(const std::string& column) {
    const std::string prefix = "force_";
    auto split = column.rfind('_');
    if (column.rfind(prefix, 0) != 0 || split < prefix.size() || split + 2 != column.size())
        throw SchemaError("malformed force channel name '" + column + "'");
    char axis = column[split + 1];
    if (axis != 'x' && axis != 'y' && axis != 'z')
        throw SchemaError("force channel '" + column + "' has no axis suffix");
    return column.substr(prefix.size(), split - prefix.size()) + ":" + axis;
}

inline void write_sweep_csv(const std::string& path, const SweepCsv& csv) {
    for (const auto& c : csv.force)
        if (c.size() != csv.time.size()) throw DimensionError("force channel length mismatch");
    for (const auto& c : csv.displacement)
        if (c.size() != csv.time.size())
            throw DimensionError("displacement channel length mismatch");
    if (csv.force_names.size() != csv.force.size() ||
        csv.sensor_names.size() != csv.displacement.size())
        throw DimensionError("channel name count mismatch");

    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "time_s";
    for (const auto& n : csv.force_names) out << ',' << n;
    for (const auto& n : csv.sensor_names) out << ",disp_" << n;
    out << "\n";
    for (size_t r = 0; r < csv.time.size(); ++r) {
        out << detail::format_full(csv.time[r]);
        for (const auto& c : csv.force) out << ',' << detail::format_full(c[r]);
        for (const auto& c : csv.displacement) out << ',' << detail::format_full(c[r]);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

inline SweepCsv read_sweep_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sweep file: " + path);

    auto split_row = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        return cells;
    };

    std::string line;
    if (!std::getline(in, line))
        throw SchemaError(path + ":1: empty sweep file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_row(line);
    if (header.empty() || header[0] != "time_s")
        throw SchemaError(path + ":1: first column must be 'time_s', got '" +
                          (header.empty() ? "" : header[0]) + "'");

    SweepCsv csv;
    std::vector<int> kinds;   // 0 force, 1 disp, per data column
    std::map<std::string, int> seen;
    for (size_t c = 1; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (++seen[name] > 1)
            throw SchemaError(path + ":1: duplicate channel '" + name + "'");
        if (name.rfind("force_", 0) == 0) {
            force_channel_label(name);   // validates the axis suffix
            csv.force_names.push_back(name);
            kinds.push_back(0);
        } else if (name.rfind("disp_", 0) == 0 && name.size() > 5) {
            csv.sensor_names.push_back(name.substr(5));
            kinds.push_back(1);
        } else {
            throw SchemaError(path + ":1: channel '" + name +
                              "' must start with 'force_' or 'disp_'");
        }
    }
    if (csv.force_names.empty())
        throw SchemaError(path + ":1: no force channel in header");
    csv.force.resize(csv.force_names.size());
    csv.displacement.resize(csv.sensor_names.size());

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_row(line);
        if (cells.size() != header.size())
            throw SchemaError(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " columns, got " +
                              std::to_string(cells.size()));
        const std::string where = path + ":" + std::to_string(line_no);
        csv.time.push_back(detail::parse_field(cells[0], where));
        size_t fi = 0, di = 0;
        for (size_t c = 1; c < cells.size(); ++c) {
            double v = detail::parse_field(cells[c], where);
            if (kinds[c - 1] == 0)
                csv.force[fi++].push_back(v);
            else
                csv.displacement[di++].push_back(v);
        }
    }
    if (csv.time.empty())
        throw SchemaError(path + ": no data rows");
    return csv;
}

// ---------------------------------------------------------------------------
// Sensor sidecar: position and measurement axis for every displacement
// channel a sweep file may reference.

inline void write_sensor_map(const std::string& path, const std::vector<SensorChannel>& sensors) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    const char* axis = "xyz";
    out << "elastoscan-sensors v1\n";
    for (const auto& s : sensors) {
        if (s.axis < 0 || s.axis > 2)
            throw ConfigError("sensor '" + s.name + "' has invalid axis");
        out << "sensor " << s.name << ' ' << detail::format_full(s.position.x()) << ' '
            << detail::format_full(s.position.y()) << ' ' << detail::format_full(s.position.z())
            << ' ' << axis[s.axis] << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<SensorChannel> read_sensor_map(const std::string& path) {
    ConfigDoc doc = load_config(path, "sensors");
    std::vector<SensorChannel> sensors;
    std::map<std::string, int> seen;
    for (const auto& l : doc.all("sensor")) {
        const std::string where = path + ":" + std::to_string(l.line_no);
        if (l.values.size() != 5)
            throw SchemaError(where + ": expected 'sensor <name> <x> <y> <z> <axis>'");
        SensorChannel s;
        s.name = l.values[0];
        if (++seen[s.name] > 1) throw SchemaError(where + ": duplicate sensor '" + s.name + "'");
        for (int d = 0; d < 3; ++d)
            s.position[d] = detail::parse_field(l.values[1 + d], where);
        const std::string& a = l.values[4];
        if (a.size() != 1 || (a[0] != 'x' && a[0] != 'y' && a[0] != 'z'))
            throw SchemaError(where + ": sensor axis must be x, y or z");
        s.axis = a[0] - 'x';
        sensors.push_back(std::move(s));
    }
    return sensors;
}

} // namespace elastoscan
