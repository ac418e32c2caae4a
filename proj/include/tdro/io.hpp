#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdro/errors.hpp"
#include "tdro/trace.hpp"

namespace tdro {

namespace fs = std::filesystem;

/// Scientific notation with 15 significant digits.
inline std::string format_csv_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.14e", v);
    return buf;
}

inline void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline std::ofstream open_for_write(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    ensure_directory(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
    auto out = open_for_write(path);
    out << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing artifact '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw ConfigError("CSV column '" + name + "' not found");
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

inline void write_csv(const fs::path& path, const CsvTable& table) {
    auto out = open_for_write(path);
    for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw ConfigError("write_csv: row width != header width");
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_csv_value(row[c]);
        out << '\n';
    }
}

inline CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV '" + path.string() + "'");
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("bad number '" + cell + "' in '" + path.string() + "'");
            }
        }
        if (row.size() != t.header.size()) throw ConfigError("ragged row in '" + path.string() + "'");
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Density trace as CSV: one row per snapshot, columns t, x_0 .. x_{n-1}.
inline void write_trace_csv(const fs::path& path, const DensityTrace& trace) {
    CsvTable t;
    t.header.push_back("t");
    for (long j = 0; j < trace.grid.size(); ++j) t.header.push_back(format_csv_value(trace.grid.x(j)));
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::vector<double> row{trace.times[k]};
        row.insert(row.end(), trace.densities[k].data(), trace.densities[k].data() + trace.densities[k].size());
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON '" + path.string() + "': " + e.what());
    }
}

// Binary snapshot layout (native little-endian):
//   uint64 n_points, float64 extent, uint64 n_times, then n_times * n_points float64 row-major.
// Times, source and tau go to a JSON sidecar with the same stem.

inline fs::path sidecar_path(const fs::path& bin) {
    fs::path p = bin;
    return p.replace_extension(".json");
}

inline void write_trace_binary(const fs::path& path, const DensityTrace& trace) {
    auto out = open_for_write(path, std::ios::out | std::ios::binary);
    const std::uint64_t n = std::uint64_t(trace.grid.size()), nt = std::uint64_t(trace.size());
    const double extent = trace.grid.extent();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&extent), sizeof extent);
    out.write(reinterpret_cast<const char*>(&nt), sizeof nt);
    for (const auto& d : trace.densities)
        out.write(reinterpret_cast<const char*>(d.data()), std::streamsize(sizeof(double) * d.size()));
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");

    nlohmann::json meta;
    meta["source"] = to_string(trace.source);
    meta["tau"] = trace.tau;
    meta["times"] = trace.times;
    meta["warnings"] = trace.diagnostics.warnings;
    write_text(sidecar_path(path), meta.dump(1) + "\n");
}

inline DensityTrace read_trace_binary(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing artifact '" + path.string() + "'");
    std::uint64_t n = 0, nt = 0;
    double extent = 0.0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&extent), sizeof extent);
    in.read(reinterpret_cast<char*>(&nt), sizeof nt);
    if (!in) throw ConfigError("truncated trace header in '" + path.string() + "'");

    DensityTrace trace;
    trace.grid = make_grid(extent, long(n));
    const auto meta = read_json(sidecar_path(path));
    trace.source = trace_source_from_string(meta.at("source").get<std::string>());
    trace.tau = meta.at("tau").get<double>();
    const auto times = meta.at("times").get<std::vector<double>>();
    if (times.size() != nt) throw ConfigError("trace sidecar lists " + std::to_string(times.size()) +
                                              " times, binary has " + std::to_string(nt));
    for (const auto& w : meta.value("warnings", std::vector<std::string>{})) trace.diagnostics.warn(w);
    for (std::uint64_t k = 0; k < nt; ++k) {
        RealField d(static_cast<long>(n));
        in.read(reinterpret_cast<char*>(d.data()), std::streamsize(sizeof(double) * n));
        if (!in) throw ConfigError("truncated trace data in '" + path.string() + "'");
        trace.append(times[k], std::move(d));
    }
    return trace;
}

} // namespace tdro
