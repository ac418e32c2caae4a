#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tdro/errors.hpp"
#include "tdro/extraction.hpp"
#include "tdro/grid.hpp"
#include "tdro/kohn_sham.hpp"
#include "tdro/model.hpp"
#include "tdro/propagation.hpp"

namespace tdro {

/// Everything a pipeline run needs. Defaults are the benchmark parameter set.
struct RunConfig {
    ModelParams model;
    Pulse pulse;
    double grid_extent = 15.0;
    long grid_points = 256;
    PropagatorConfig propagation;
    double t_max_2d = 268.0; // full 2D validation run stops here
    bool trace_csv = false;  // also export density traces as CSV
    int channels = 3;
    int readout_points = 3;
    ReadoutMode readout_mode = ReadoutMode::square_exact;
    double window_step = 25.0;
    int ks_virtuals = 4;
    ScfOptions scf;
    std::string ks_source = "tdks_sic";
    double oracle_dt = 0.01;
    std::string outputs = "out";

    Grid1D lab_grid() const { return make_grid(grid_extent, grid_points); }

    PropagatorConfig propagation_2d() const {
        PropagatorConfig c = propagation;
        c.t_max = t_max_2d;
        return c;
    }

    void validate() const {
        model.validate();
        pulse.validate();
        (void)lab_grid();
        propagation.validate(pulse);
        propagation_2d().validate(pulse);
        if (t_max_2d > propagation.t_max) throw ConfigError("propagation.t_max_2d must not exceed propagation.t_max");
        if (channels < 1 || channels > 8) throw ConfigError("channels must be in [1, 8]");
        if (readout_points < channels) throw ConfigError("readout.n_points must be >= channels");
        if (readout_mode == ReadoutMode::square_exact && readout_points != channels)
            throw ConfigError("readout.mode = square_exact needs readout.n_points == channels");
        if (!(window_step > 0.0)) throw ConfigError("readout.window_step must be positive");
        if (window_step > propagation.t_max - pulse.tau)
            throw ConfigError("readout.window_step exceeds the post-pulse span");
        if (ks_virtuals < channels - 1) throw ConfigError("ks.n_virtuals must be >= channels - 1");
        if (!(scf.mixing > 0.0 && scf.mixing <= 1.0)) throw ConfigError("ks.mixing must be in (0, 1]");
        if (!(scf.tolerance > 0.0)) throw ConfigError("ks.tolerance must be positive");
        if (scf.max_iterations < 1) throw ConfigError("ks.max_iterations must be >= 1");
        if (ks_source != "tdks_sic" && ks_source != "tdks_exact")
            throw ConfigError("extract.ks_source must be tdks_sic or tdks_exact");
        if (!(oracle_dt > 0.0) || oracle_dt > 0.01) throw ConfigError("oracle.dt must be in (0, 0.01]");
        if (outputs.empty()) throw ConfigError("outputs must name a directory");
    }

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string format_exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
    return out;
}

inline long parse_long(const std::string& key, const std::string& v) {
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

inline const std::vector<std::pair<std::string, Field>>& config_fields() {
    auto real = [](double RunConfig::*outer) {
        return Field{[outer](const RunConfig& c) { return format_exact(c.*outer); },
                     [outer](RunConfig& c, const std::string& v) { c.*outer = parse_double("", v); }};
    };
    auto nested = [](auto get_ref) {
        return Field{[get_ref](const RunConfig& c) { return format_exact(get_ref(const_cast<RunConfig&>(c))); },
                     [get_ref](RunConfig& c, const std::string& v) { get_ref(c) = parse_double("", v); }};
    };
    auto integer = [](auto get_ref) {
        return Field{[get_ref](const RunConfig& c) { return std::to_string(get_ref(const_cast<RunConfig&>(c))); },
                     [get_ref](RunConfig& c, const std::string& v) { get_ref(c) = parse_long("", v); }};
    };
    static const std::vector<std::pair<std::string, Field>> fields = {
        {"model.omega", nested([](RunConfig& c) -> double& { return c.model.omega; })},
        {"model.b", nested([](RunConfig& c) -> double& { return c.model.b; })},
        {"pulse.f0", nested([](RunConfig& c) -> double& { return c.pulse.f0; })},
        {"pulse.omega_l", nested([](RunConfig& c) -> double& { return c.pulse.omega_l; })},
        {"pulse.tau", nested([](RunConfig& c) -> double& { return c.pulse.tau; })},
        {"pulse.ramp_cycles", nested([](RunConfig& c) -> double& { return c.pulse.ramp_cycles; })},
        {"pulse.carrier_phase", nested([](RunConfig& c) -> double& { return c.pulse.carrier_phase; })},
        {"pulse.ramp_shape",
         {[](const RunConfig& c) { return std::string(c.pulse.ramp_shape == RampShape::linear ? "linear" : "sin2"); },
          [](RunConfig& c, const std::string& v) {
              if (v == "linear") c.pulse.ramp_shape = RampShape::linear;
              else if (v == "sin2") c.pulse.ramp_shape = RampShape::sin2;
              else throw ConfigError("expected linear or sin2, got '" + v + "'");
          }}},
        {"grids.extent", real(&RunConfig::grid_extent)},
        {"grids.n_points", integer([](RunConfig& c) -> long& { return c.grid_points; })},
        {"propagation.dt", nested([](RunConfig& c) -> double& { return c.propagation.dt; })},
        {"propagation.t_max", nested([](RunConfig& c) -> double& { return c.propagation.t_max; })},
        {"propagation.t_max_2d", real(&RunConfig::t_max_2d)},
        {"propagation.record_stride",
         {[](const RunConfig& c) { return std::to_string(c.propagation.record_stride); },
          [](RunConfig& c, const std::string& v) { c.propagation.record_stride = int(parse_long("", v)); }}},
        {"propagation.scheme",
         {[](const RunConfig& c) { return to_string(c.propagation.scheme); },
          [](RunConfig& c, const std::string& v) { c.propagation.scheme = split_scheme_from_string(v); }}},
        {"propagation.trace_csv",
         {[](const RunConfig& c) { return std::string(c.trace_csv ? "true" : "false"); },
          [](RunConfig& c, const std::string& v) { c.trace_csv = parse_bool("", v); }}},
        {"channels",
         {[](const RunConfig& c) { return std::to_string(c.channels); },
          [](RunConfig& c, const std::string& v) { c.channels = int(parse_long("", v)); }}},
        {"readout.n_points",
         {[](const RunConfig& c) { return std::to_string(c.readout_points); },
          [](RunConfig& c, const std::string& v) { c.readout_points = int(parse_long("", v)); }}},
        {"readout.mode",
         {[](const RunConfig& c) { return to_string(c.readout_mode); },
          [](RunConfig& c, const std::string& v) { c.readout_mode = readout_mode_from_string(v); }}},
        {"readout.window_step", real(&RunConfig::window_step)},
        {"ks.n_virtuals",
         {[](const RunConfig& c) { return std::to_string(c.ks_virtuals); },
          [](RunConfig& c, const std::string& v) { c.ks_virtuals = int(parse_long("", v)); }}},
        {"ks.mixing", nested([](RunConfig& c) -> double& { return c.scf.mixing; })},
        {"ks.tolerance", nested([](RunConfig& c) -> double& { return c.scf.tolerance; })},
        {"ks.max_iterations",
         {[](const RunConfig& c) { return std::to_string(c.scf.max_iterations); },
          [](RunConfig& c, const std::string& v) { c.scf.max_iterations = int(parse_long("", v)); }}},
        {"extract.ks_source",
         {[](const RunConfig& c) { return c.ks_source; }, [](RunConfig& c, const std::string& v) { c.ks_source = v; }}},
        {"oracle.dt", real(&RunConfig::oracle_dt)},
        {"outputs",
         {[](const RunConfig& c) { return c.outputs; }, [](RunConfig& c, const std::string& v) { c.outputs = v; }}},
    };
    return fields;
}

} // namespace detail

/// Applies one `key=value` assignment.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    for (const auto& [name, field] : detail::config_fields()) {
        if (name != key) continue;
        try {
            field.set(c, value);
        } catch (const ConfigError& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
        return;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

inline void apply_override(RunConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    apply_setting(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// Flat `key = value` text; `#` starts a comment. Unset keys keep their defaults.
inline RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        try {
            apply_override(c, line);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string serialize_config(const RunConfig& c) {
    std::string out;
    for (const auto& [name, field] : detail::config_fields()) out += name + " = " + field.get(c) + "\n";
    return out;
}

} // namespace tdro
