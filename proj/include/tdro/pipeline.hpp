#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "tdro/config.hpp"
#include "tdro/extraction.hpp"
#include "tdro/io.hpp"
#include "tdro/kohn_sham.hpp"
#include "tdro/oracle.hpp"
#include "tdro/propagation.hpp"
#include "tdro/stationary.hpp"

namespace tdro {

// Output layout under the run directory:
//   ground/      config.txt, channels.csv, channel_densities.csv, ks_sic.csv, ground.json
//   <source>/    density.bin (+ density.json), projections.csv, run.json
//   fig1.csv, fig2.csv, summary.json, validation.json

/// In-memory ground-state data shared by every stage.
struct GroundData {
    Grid1D lab;
    std::vector<Eigenpair> relative;
    ExactBasis basis;
    std::vector<ChannelState> channels;
    KsGroundState ks_sic;
};

inline int basis_n_max(const RunConfig& cfg) { return cfg.channels + 1; }

inline GroundData compute_ground(const RunConfig& cfg) {
    cfg.validate();
    GroundData g;
    g.lab = cfg.lab_grid();
    g.relative = solve_relative_eigenstates(cfg.model, g.lab.pair_grid(), 2);
    g.basis = make_exact_basis(cfg.model, g.lab, basis_n_max(cfg), g.relative);
    g.channels = cm_ladder_channels(cfg.channels, g.relative, cfg.model, g.lab);
    g.ks_sic = ks_scf_ground_state(cfg.model, g.lab, ExchangeSic{}, cfg.ks_virtuals, cfg.scf);
    return g;
}

inline std::string channel_tag(const ChannelLabel& l) { return std::to_string(l.n_cm) + "_" + std::to_string(l.n_rel); }

namespace detail {

// Keys whose change invalidates the ground artifacts.
inline std::string ground_fingerprint(const RunConfig& cfg) {
    std::string out;
    std::istringstream in(serialize_config(cfg));
    std::string line;
    for (const char* prefix : {"model.", "grids.", "channels ", "ks."}) {
        in.clear();
        in.seekg(0);
        while (std::getline(in, line))
            if (line.rfind(prefix, 0) == 0) out += line + "\n";
    }
    return out;
}

inline double post_pulse_range(const std::vector<double>& times, const std::vector<double>& v, double tau) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] >= tau - 1e-9) {
            lo = std::min(lo, v[k]);
            hi = std::max(hi, v[k]);
        }
    return hi - lo;
}

/// Trapezoidal mean of a sampled series over [tau, t_end] with linear interpolation at the ends.
inline double series_average(const std::vector<double>& times, const std::vector<double>& v, double tau, double t_end) {
    auto at = [&](double t) {
        std::size_t k = 0;
        while (k + 1 < times.size() && times[k + 1] < t) ++k;
        if (k + 1 == times.size()) return v.back();
        const double s = (t - times[k]) / (times[k + 1] - times[k]);
        return (1 - s) * v[k] + s * v[k + 1];
    };
    double acc = 0.0, t_prev = tau, v_prev = at(tau);
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] <= tau) continue;
        if (times[k] >= t_end) break;
        acc += 0.5 * (times[k] - t_prev) * (v_prev + v[k]);
        t_prev = times[k];
        v_prev = v[k];
    }
    acc += 0.5 * (t_end - t_prev) * (v_prev + at(t_end));
    return acc / (t_end - tau);
}

inline std::size_t first_index_at_or_after(const std::vector<double>& times, double t) {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] >= t - 1e-9) return k;
    throw ConfigError("no snapshot at or after t = " + std::to_string(t));
}

inline void write_projection_csv(const fs::path& path, const ProjectionTrace& p, const std::vector<std::string>& names) {
    CsvTable t;
    t.header.push_back("t");
    t.header.insert(t.header.end(), names.begin(), names.end());
    for (std::size_t k = 0; k < p.times.size(); ++k) {
        std::vector<double> row{p.times[k]};
        row.insert(row.end(), p.probabilities[k].begin(), p.probabilities[k].end());
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline std::vector<std::string> exact_columns(const GroundData& g) {
    std::vector<std::string> out;
    for (const auto& c : g.channels) out.push_back("P_exact_" + channel_tag(c.label));
    return out;
}

inline std::vector<std::string> ks_columns(int n) {
    std::vector<std::string> out;
    for (int m = 0; m < n; ++m) out.push_back("P_ks_0_" + std::to_string(m));
    return out;
}

} // namespace detail

inline void run_ground(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const GroundData g = compute_ground(cfg);
    const fs::path dir = out / "ground";
    ensure_directory(dir);
    write_text(dir / "config.txt", serialize_config(cfg));

    CsvTable ch;
    ch.header = {"n_cm", "n_rel", "energy"};
    for (const auto& c : g.channels) ch.rows.push_back({double(c.label.n_cm), double(c.label.n_rel), c.energy});
    write_csv(dir / "channels.csv", ch);

    CsvTable dens;
    dens.header.push_back("x");
    for (const auto& c : g.channels) dens.header.push_back("rho_" + channel_tag(c.label));
    for (long j = 0; j < g.lab.size(); ++j) {
        std::vector<double> row{g.lab.x(j)};
        for (const auto& c : g.channels) row.push_back(c.channel_density[j]);
        dens.rows.push_back(std::move(row));
    }
    write_csv(dir / "channel_densities.csv", dens);

    const KsGroundState& ks = g.ks_sic;
    CsvTable kst;
    kst.header = {"x", "phi_0", "density", "v_ks", "v_hartree", "v_xc"};
    for (std::size_t v = 0; v < ks.virtuals.size(); ++v) kst.header.push_back("phi_" + std::to_string(v + 1));
    for (long j = 0; j < g.lab.size(); ++j) {
        std::vector<double> row{g.lab.x(j), ks.orbital.amplitudes[j].real(), ks.density[j], ks.ks_potential[j],
                                ks.hartree[j], ks.xc_potential[j]};
        for (const auto& v : ks.virtuals) row.push_back(v.state.amplitudes[j].real());
        kst.rows.push_back(std::move(row));
    }
    write_csv(dir / "ks_sic.csv", kst);

    nlohmann::json j;
    j["relative_energies"] = {g.relative[0].energy, g.relative[1].energy};
    for (const auto& c : g.channels)
        j["channels"].push_back({{"label", channel_tag(c.label)}, {"energy", c.energy}});
    j["ks_sic"] = {{"orbital_energy", ks.orbital_energy},
                   {"iterations", ks.iterations},
                   {"density_change", ks.density_change},
                   {"residual", ks.residual},
                   {"l1_vs_exact_ground", l1_distance(ks.density, g.channels[0].channel_density, g.lab)}};
    for (const auto& v : ks.virtuals) j["ks_sic"]["virtual_energies"].push_back(v.energy);
    write_json(dir / "ground.json", j);

    log << "ground: E(0,0) = " << format_csv_value(g.channels[0].energy) << ", KS SCF " << ks.iterations
        << " iterations, residual " << format_csv_value(ks.residual) << "\n";
}

/// Ground data for a later stage; the persisted ground run must come from the same model, grid and channel set.
inline GroundData load_ground(const RunConfig& cfg, const fs::path& out) {
    const fs::path stored = out / "ground" / "config.txt";
    if (!fs::exists(stored) || !fs::exists(out / "ground" / "ground.json"))
        throw ConfigError("missing ground artifacts in '" + (out / "ground").string() + "'; run 'ground' first");
    if (detail::ground_fingerprint(parse_config(read_text(stored))) != detail::ground_fingerprint(cfg))
        throw ConfigError("ground artifacts were produced with a different model/grid/channel config; re-run 'ground'");
    return compute_ground(cfg);
}

namespace detail {

inline ExactRun exact_run(const RunConfig& cfg, const GroundData& g) {
    return propagate_exact_factorized(g.basis, cfg.model, cfg.pulse, cfg.propagation);
}

// Max L1 distance to the exact trace at shared times.
inline double max_l1_to(const DensityTrace& a, const DensityTrace& exact) {
    double worst = 0.0;
    std::size_t j = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        while (j < exact.size() && exact.times[j] < a.times[k] - 1e-9) ++j;
        if (j == exact.size()) break;
        if (std::abs(exact.times[j] - a.times[k]) > 1e-9) continue;
        worst = std::max(worst, l1_distance(a.densities[k], exact.densities[j], a.grid));
    }
    return worst;
}

inline DensityTrace exact_reference(const RunConfig& cfg, const GroundData& g, const fs::path& out) {
    const fs::path p = out / "exact" / "density.bin";
    if (fs::exists(p)) {
        DensityTrace t = read_trace_binary(p);
        if (t.times.size() > 1 && std::abs(t.times.back() - cfg.propagation.t_max) < 1e-9 &&
            std::abs(t.times[1] - t.times[0] - cfg.propagation.dt * cfg.propagation.record_stride) < 1e-9)
            return t;
    }
    return exact_run(cfg, g).trace;
}

inline void write_run_outputs(const RunConfig& cfg, const fs::path& dir, const DensityTrace& trace) {
    write_trace_binary(dir / "density.bin", trace);
    if (cfg.trace_csv) write_trace_csv(dir / "density.csv", trace);
}

} // namespace detail

inline void run_propagate(const RunConfig& cfg, TraceSource source, const fs::path& out, std::ostream& log) {
    const GroundData g = load_ground(cfg, out);
    const fs::path dir = out / to_string(source);
    ensure_directory(dir);
    nlohmann::json j;
    j["source"] = to_string(source);

    switch (source) {
    case TraceSource::exact: {
        const ExactRun run = detail::exact_run(cfg, g);
        detail::write_run_outputs(cfg, dir, run.trace);
        detail::write_projection_csv(dir / "projections.csv", project_exact(run, g.basis, g.channels),
                                     detail::exact_columns(g));
        j["max_norm_drift"] = run.max_norm_drift;
        j["warnings"] = run.trace.diagnostics.warnings;
        log << "propagate exact: " << run.trace.size() << " snapshots, norm drift "
            << format_csv_value(run.max_norm_drift) << "\n";
        break;
    }
    case TraceSource::exact_2d: {
        const Exact2DRun run = propagate_exact_2d(g.basis, cfg.model, cfg.pulse, cfg.propagation_2d());
        detail::write_run_outputs(cfg, dir, run.trace);
        double spread = 0.0;
        for (double e : run.post_pulse_energies) spread = std::max(spread, std::abs(e - run.post_pulse_energies.front()));
        j["max_norm_drift"] = run.max_norm_drift;
        j["max_exchange_asymmetry"] = run.max_exchange_asymmetry;
        j["post_pulse_energy_spread"] = spread;
        j["warnings"] = run.trace.diagnostics.warnings;
        log << "propagate exact_2d: " << run.trace.size() << " snapshots to t = "
            << format_csv_value(cfg.t_max_2d) << ", energy spread " << format_csv_value(spread) << "\n";
        break;
    }
    case TraceSource::tdks_exact_vxc:
    case TraceSource::tdks_exchange_sic: {
        TdksRun run;
        KsGroundState ks0;
        if (source == TraceSource::tdks_exchange_sic) {
            ks0 = g.ks_sic;
            run = propagate_tdks(ks0, ExchangeSic{}, cfg.model, cfg.pulse, cfg.propagation);
        } else {
            const KsInversion inv = invert_ks_equation(g.channels[0].channel_density, cfg.model, g.lab);
            const auto states = solve_in_potential(g.lab, inv.ks_potential, cfg.ks_virtuals + 1);
            ks0.grid = g.lab;
            ks0.xc_model = XcTag::exact_inverted;
            ks0.orbital = states[0].state;
            ks0.orbital_energy = states[0].energy;
            ks0.density = 2.0 * ks0.orbital.probability();
            ks0.ks_potential = inv.ks_potential;
            ks0.xc_potential = inv.xc_potential;
            ks0.virtuals.assign(states.begin() + 1, states.end());
            const auto traj = classical_trajectory(cfg.pulse, cfg.model, cfg.oracle_dt, cfg.propagation.t_max);
            const ExactShift xc(g.lab, inv.xc_potential, [traj](double t) { return classical_shift(t, traj); });
            run = propagate_tdks(ks0, xc, cfg.model, cfg.pulse, cfg.propagation);
        }
        detail::write_run_outputs(cfg, dir, run.trace);
        detail::write_projection_csv(dir / "projections.csv",
                                     project_ks_determinants(run.trace.times, run.orbitals, ks0, cfg.channels),
                                     detail::ks_columns(cfg.channels));
        const double l1 = detail::max_l1_to(run.trace, detail::exact_reference(cfg, g, out));
        j["max_norm_drift"] = run.max_norm_drift;
        j["max_l1_vs_exact"] = l1;
        j["warnings"] = run.trace.diagnostics.warnings;
        log << "propagate " << to_string(source) << ": " << run.trace.size() << " snapshots, max L1 vs exact "
            << format_csv_value(l1) << "\n";
        break;
    }
    }
    write_json(dir / "run.json", j);
}

namespace detail {

struct ProjectionTable {
    std::vector<double> times;
    std::vector<std::vector<double>> columns; // [channel][time]
};

inline ProjectionTable read_projections(const fs::path& path, const std::vector<std::string>& names) {
    const CsvTable t = read_csv(path);
    ProjectionTable p;
    p.times = t.values("t");
    for (const auto& n : names) p.columns.push_back(t.values(n));
    return p;
}

inline std::vector<double> readout_windows(const RunConfig& cfg, double t_last) {
    std::vector<double> w;
    const double span = t_last - cfg.pulse.tau;
    for (long k = 1; double(k) * cfg.window_step <= span + 1e-9; ++k) w.push_back(double(k) * cfg.window_step);
    return w;
}

} // namespace detail

inline void run_extract(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const GroundData g = load_ground(cfg, out);
    const DensityTrace trace = read_trace_binary(out / "exact" / "density.bin");
    const auto exact_names = detail::exact_columns(g);
    const auto ks_names = detail::ks_columns(cfg.channels);
    const auto exact = detail::read_projections(out / "exact" / "projections.csv", exact_names);
    const auto ks = detail::read_projections(out / cfg.ks_source / "projections.csv", ks_names);
    if (exact.times != trace.times || ks.times != trace.times)
        throw ConfigError("projection tables and exact trace use different snapshot times; re-run propagate");

    const RMatrix r = select_sample_points(g.channels, cfg.readout_points, cfg.readout_mode);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t nch = g.channels.size();

    CsvTable fig1;
    fig1.header = {"t"};
    fig1.header.insert(fig1.header.end(), exact_names.begin(), exact_names.end());
    fig1.header.insert(fig1.header.end(), ks_names.begin(), ks_names.end());
    for (const auto& c : g.channels) fig1.header.push_back("P_readout_" + channel_tag(c.label));
    const auto running = running_average(trace);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::vector<double> row{trace.times[k]};
        for (std::size_t f = 0; f < nch; ++f) row.push_back(exact.columns[f][k]);
        for (std::size_t f = 0; f < nch; ++f) row.push_back(ks.columns[f][k]);
        if (running[k].size() > 0) {
            const auto p = invert_readout(running[k], r, trace.times[k] - trace.tau).probabilities;
            row.insert(row.end(), p.begin(), p.end());
        } else {
            row.insert(row.end(), nch, nan);
        }
        fig1.rows.push_back(std::move(row));
    }
    write_csv(out / "fig1.csv", fig1);

    const std::size_t k_tau = detail::first_index_at_or_after(trace.times, trace.tau);
    std::vector<double> p_exact;
    for (std::size_t f = 0; f < nch; ++f) p_exact.push_back(exact.columns[f][k_tau]);

    const double min_gap = g.channels.size() > 1 ? g.channels[1].energy - g.channels[0].energy : 0.0;
    CsvTable fig2;
    fig2.header = {"window"};
    for (const auto& c : g.channels) fig2.header.push_back("P_exact_" + channel_tag(c.label));
    for (const auto& c : g.channels) fig2.header.push_back("P_readout_" + channel_tag(c.label));
    fig2.header.insert(fig2.header.end(), ks_names.begin(), ks_names.end());
    fig2.header.push_back("residual");
    ReadoutResult last;
    std::vector<double> ks_last;
    std::vector<std::string> warnings;
    for (double w : detail::readout_windows(cfg, trace.times.back())) {
        const AveragedDensity avg = time_average_density(trace, trace.tau + w, min_gap);
        last = invert_readout(avg.field, r, w);
        ks_last.clear();
        for (std::size_t f = 0; f < nch; ++f)
            ks_last.push_back(detail::series_average(ks.times, ks.columns[f], trace.tau, trace.tau + w));
        std::vector<double> row{w};
        row.insert(row.end(), p_exact.begin(), p_exact.end());
        row.insert(row.end(), last.probabilities.begin(), last.probabilities.end());
        row.insert(row.end(), ks_last.begin(), ks_last.end());
        row.push_back(last.residual);
        fig2.rows.push_back(std::move(row));
        for (const auto& m : avg.diagnostics.warnings) warnings.push_back("window " + format_csv_value(w) + ": " + m);
        if (!last.within_bounds) warnings.push_back("window " + format_csv_value(w) + ": read-out outside [-0.02, 1.02]");
    }
    write_csv(out / "fig2.csv", fig2);

    const auto traj = classical_trajectory(cfg.pulse, cfg.model, cfg.oracle_dt, cfg.pulse.tau);
    const double lambda = traj.mean_excitation(cfg.pulse.tau);
    double readout_error = 0.0, ks_error = 0.0;
    for (std::size_t f = 0; f < nch; ++f) {
        readout_error = std::max(readout_error, std::abs(last.probabilities[f] - p_exact[f]));
        ks_error = std::max(ks_error, std::abs(ks_last[f] - p_exact[f]));
    }
    nlohmann::json s;
    s["lambda"] = lambda;
    s["poisson"] = poisson_probabilities(lambda, int(nch) - 1);
    s["channels"] = exact_names;
    s["p_exact"] = p_exact;
    s["p_readout"] = last.probabilities;
    s["p_ks_average"] = ks_last;
    s["ks_source"] = cfg.ks_source;
    s["window"] = last.window;
    s["readout_mode"] = to_string(r.mode);
    s["sample_points"] = r.positions();
    s["condition_number"] = r.condition_number;
    s["residual"] = last.residual;
    s["max_readout_error"] = readout_error;
    s["max_ks_error"] = ks_error;
    s["warnings"] = warnings;
    write_json(out / "summary.json", s);

    log << "extract: window " << format_csv_value(last.window) << ", max |P_readout - P_exact| "
        << format_csv_value(readout_error) << ", max |<P_ks> - P_exact| " << format_csv_value(ks_error) << "\n";
}

struct ValidationCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
    }
};

inline ValidationReport run_validate(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    const GroundData g = load_ground(cfg, out);
    const DensityTrace exact = read_trace_binary(out / "exact" / "density.bin");
    const DensityTrace full = read_trace_binary(out / "exact_2d" / "density.bin");
    const auto proj = detail::read_projections(out / "exact" / "projections.csv", detail::exact_columns(g));
    const std::size_t nch = g.channels.size();

    ValidationReport rep;
    auto add = [&](std::string name, double value, double threshold) {
        // NaN fails.
        rep.checks.push_back({std::move(name), value, threshold, value <= threshold});
    };

    const auto traj = classical_trajectory(cfg.pulse, cfg.model, cfg.oracle_dt, exact.times.back());
    const double lambda = traj.mean_excitation(cfg.pulse.tau);
    const auto poisson = poisson_probabilities(lambda, int(nch) - 1);
    const std::size_t k_tau = detail::first_index_at_or_after(proj.times, cfg.pulse.tau);
    double dp = 0.0;
    for (std::size_t f = 0; f < nch; ++f) dp = std::max(dp, std::abs(proj.columns[f][k_tau] - poisson[f]));
    add("poisson", dp, 1e-3);

    add("harmonic_potential_theorem", hpt_check(exact, g.channels[0].channel_density, traj), 1e-3);

    if (!(full.grid == exact.grid)) throw ConfigError("exact and exact_2d traces use different grids");
    add("exact_2d_vs_factorized", detail::max_l1_to(full, exact), 1e-4);

    double constancy = 0.0;
    for (std::size_t f = 0; f < nch; ++f)
        constancy = std::max(constancy, detail::post_pulse_range(proj.times, proj.columns[f], cfg.pulse.tau));
    add("post_pulse_constancy", constancy, 1e-8);

    const RMatrix r = select_sample_points(g.channels, cfg.readout_points, cfg.readout_mode);
    const TransitionDensities td(g.channels);
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double round_trip = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(nch);
        double sum = 0.0;
        for (auto& v : p) sum += (v = u(rng));
        const double scale = u(rng) / sum;
        Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(long(nch), long(nch));
        for (std::size_t f = 0; f < nch; ++f) t(long(f), long(f)) = p[f] *= scale;
        DensityTrace synth;
        synth.grid = g.lab;
        synth.tau = cfg.pulse.tau;
        for (int k = 0; k <= 20; ++k) {
            const double tt = cfg.pulse.tau + 10.0 * k;
            synth.append(tt, synthesize_density(t, td, tt, cfg.pulse.tau));
        }
        const auto back = invert_readout(time_average_density(synth, synth.times.back()).field, r).probabilities;
        for (std::size_t f = 0; f < nch; ++f) round_trip = std::max(round_trip, std::abs(back[f] - p[f]));
    }
    add("readout_round_trip", round_trip, 1e-10);

    const double w_max = detail::readout_windows(cfg, exact.times.back()).back();
    const auto readout = invert_readout(time_average_density(exact, exact.tau + w_max).field, r, w_max).probabilities;
    double err = 0.0;
    for (std::size_t f = 0; f < nch; ++f) err = std::max(err, std::abs(readout[f] - proj.columns[f][k_tau]));
    add("readout_vs_exact", err, 5e-3);

    nlohmann::json j;
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
        log << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << format_csv_value(c.value)
            << " (threshold " << format_csv_value(c.threshold) << ")\n";
    }
    j["passed"] = rep.passed();
    write_json(out / "validation.json", j);
    return rep;
}

/// ground, exact, exact_2d and the configured KS source, then extract and validate.
inline ValidationReport run_all(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    run_ground(cfg, out, log);
    run_propagate(cfg, TraceSource::exact, out, log);
    run_propagate(cfg, TraceSource::exact_2d, out, log);
    run_propagate(cfg, trace_source_from_string(cfg.ks_source), out, log);
    run_extract(cfg, out, log);
    return run_validate(cfg, out, log);
}

} // namespace tdro
