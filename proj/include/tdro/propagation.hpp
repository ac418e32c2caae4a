#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tdro/diagnostics.hpp"
#include "tdro/errors.hpp"
#include "tdro/fft.hpp"
#include "tdro/grid.hpp"
#include "tdro/kohn_sham.hpp"
#include "tdro/model.hpp"
#include "tdro/spectral.hpp"
#include "tdro/stationary.hpp"
#include "tdro/trace.hpp"

namespace tdro {

/// strang: one kinetic-potential-kinetic step per dt.
/// triple_jump: fourth-order symmetric composition of three Strang steps with weights (w1, w0, w1).
enum class SplitScheme { strang, triple_jump };

inline std::string to_string(SplitScheme s) { return s == SplitScheme::strang ? "strang" : "triple_jump"; }

inline SplitScheme split_scheme_from_string(const std::string& s) {
    if (s == "strang") return SplitScheme::strang;
    if (s == "triple_jump") return SplitScheme::triple_jump;
    throw ConfigError("unknown propagation scheme '" + s + "'");
}

inline std::vector<double> composition_weights(SplitScheme s) {
    if (s == SplitScheme::strang) return {1.0};
    const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
    return {w1, 1.0 - 2.0 * w1, w1};
}

struct PropagatorConfig {
    double dt = 0.02;
    double t_max = 1168.0;
    int record_stride = 25;
    SplitScheme scheme = SplitScheme::triple_jump;

    long steps() const { return std::lround(t_max / dt); }

    void validate(const Pulse& pulse) const {
        if (!(dt > 0.0)) throw ConfigError("propagation.dt must be positive");
        if (record_stride < 1) throw ConfigError("propagation.record_stride must be >= 1");
        if (!(t_max > pulse.tau)) throw ConfigError("propagation.t_max must exceed pulse.tau");
        if (std::abs(double(steps()) * dt - t_max) > 1e-9 * t_max)
            throw ConfigError("propagation.t_max must be an integer multiple of propagation.dt");
    }

    friend bool operator==(const PropagatorConfig&, const PropagatorConfig&) = default;
};

/// The kinetic phase dt * k^2/(2m) must stay below pi over the band that carries the state.
/// `max_weight` is the largest |substep weight| of the composition.
inline void check_kinetic_phase(const ComplexField& psi, const Grid1D& grid, double mass, double dt,
                                double max_weight = 1.0) {
    const double k = effective_wavenumber(psi, grid);
    const double phase = max_weight * dt * k * k / (2.0 * mass);
    if (phase >= std::numbers::pi)
        throw ConfigError("time step aliases the kinetic phase: dt * k_eff^2 / 2m = " + std::to_string(phase));
}

inline double max_abs_weight(SplitScheme s) {
    double m = 0.0;
    for (double w : composition_weights(s)) m = std::max(m, std::abs(w));
    return m;
}

/// Split-operator factors exp(-iT f dt) and exp(-iV f dt) on a periodic 1D grid.
class SplitOperator1D {
public:
    SplitOperator1D(const Grid1D& grid, double mass, double dt)
        : dt_(dt), mass_(mass), k_(wavenumbers(grid)), fft_(grid.size()) {}

    void kinetic(ComplexField& psi, double fraction) {
        fft_.forward(psi.data());
        psi.array() *= kinetic_phase(fraction).array();
        fft_.backward(psi.data());
    }

    void potential(ComplexField& psi, const RealField& v, double fraction) const {
        for (long j = 0; j < psi.size(); ++j) psi[j] *= std::polar(1.0, -fraction * dt_ * v[j]);
    }

    void strang(ComplexField& psi, const RealField& v, double fraction = 1.0) {
        kinetic(psi, 0.5 * fraction);
        potential(psi, v, fraction);
        kinetic(psi, 0.5 * fraction);
    }

    /// One composed step from t; potential_at(t_mid) supplies V at each substep midpoint.
    /// Adjacent half-kinetic factors of neighbouring substeps are merged.
    template <class PotentialAt>
    void step(ComplexField& psi, double t, const std::vector<double>& weights, PotentialAt&& potential_at) {
        double elapsed = 0.0;
        kinetic(psi, 0.5 * weights.front());
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double w = weights[i];
            potential(psi, potential_at(t + (elapsed + 0.5 * w) * dt_), w);
            elapsed += w;
            const double next = i + 1 < weights.size() ? weights[i + 1] : 0.0;
            kinetic(psi, 0.5 * (w + next));
        }
    }

private:
    const ComplexField& kinetic_phase(double fraction) {
        for (const auto& [f, phase] : cache_)
            if (f == fraction) return phase;
        ComplexField phase(k_.size());
        for (long j = 0; j < k_.size(); ++j)
            phase[j] = std::polar(1.0, -fraction * dt_ * k_[j] * k_[j] / (2.0 * mass_));
        cache_.emplace_back(fraction, std::move(phase));
        return cache_.back().second;
    }

    double dt_;
    double mass_;
    RealField k_;
    FftPlan fft_;
    std::vector<std::pair<double, ComplexField>> cache_;
};

/// Relative ground factor and c.o.m. oscillator states shared by the exact propagators.
struct ExactBasis {
    Grid1D lab;
    WaveFn1D relative_ground;
    std::vector<WaveFn1D> cm_states; // h_N, N = 0..n_max

    const Grid1D& pair() const { return relative_ground.grid; }
};

inline ExactBasis make_exact_basis(const ModelParams& params, const Grid1D& lab, int n_max,
                                   const std::vector<Eigenpair>& relative_states) {
    ExactBasis basis;
    basis.lab = lab;
    basis.relative_ground = relative_states.at(0).state;
    require_pair_grid(lab, basis.relative_ground.grid, "make_exact_basis");
    for (int n = 0; n <= n_max; ++n) basis.cm_states.push_back(cm_eigenstate(n, params, lab.pair_grid()).state);
    return basis;
}

struct ExactRun {
    DensityTrace trace;
    std::vector<std::vector<complex>> cm_amplitudes; // <h_N | h(t)> per snapshot
    double max_norm_drift = 0.0;
};

/// Evolves h(R, t) under H_cm(t); the relative factor g(r) is stationary.
inline ExactRun propagate_exact_factorized(const ExactBasis& basis, const ModelParams& params, const Pulse& pulse,
                                           const PropagatorConfig& cfg) {
    cfg.validate(pulse);
    const Grid1D& pair = basis.pair();
    WaveFn1D h = basis.cm_states.at(0);
    check_kinetic_phase(h.amplitudes, pair, 0.5, cfg.dt, max_abs_weight(cfg.scheme));

    SplitOperator1D prop(pair, 0.5, cfg.dt);
    const std::vector<double> weights = composition_weights(cfg.scheme);
    const RealField v0 = cm_potential(pair, params, 0.0);
    const RealField big_r = pair.points();

    ExactRun run;
    run.trace.grid = basis.lab;
    run.trace.source = TraceSource::exact;
    run.trace.tau = pulse.tau;
    auto record = [&](double t) {
        run.trace.append(t, lab_density_from_factorized(basis.relative_ground, h, basis.lab));
        std::vector<complex> amps;
        for (const auto& hn : basis.cm_states) amps.push_back(inner_product(hn, h));
        run.cm_amplitudes.push_back(std::move(amps));
        run.max_norm_drift = std::max(run.max_norm_drift, std::abs(h.norm_squared() - 1.0));
    };

    const long steps = cfg.steps();
    record(0.0);
    RealField v(pair.size());
    auto potential_at = [&](double t) -> const RealField& {
        v = v0 - pulse.field(t) * big_r;
        return v;
    };
    for (long s = 0; s < steps; ++s) {
        prop.step(h.amplitudes, double(s) * cfg.dt, weights, potential_at);
        if ((s + 1) % cfg.record_stride == 0 || s + 1 == steps) record(double(s + 1) * cfg.dt);
    }
    if (boundary_amplitude(h.amplitudes) > 1e-8)
        run.trace.diagnostics.warn("c.o.m. wavepacket reaches the box edge");
    return run;
}

struct Exact2DRun {
    DensityTrace trace;
    double max_exchange_asymmetry = 0.0;
    double max_norm_drift = 0.0;
    std::vector<double> post_pulse_energies; // <H_0> at snapshots with t > tau
};

/// Full two-electron split-operator evolution on the lab (x1, x2) grid.
inline Exact2DRun propagate_exact_2d(const ExactBasis& basis, const ModelParams& params, const Pulse& pulse,
                                     const PropagatorConfig& cfg) {
    cfg.validate(pulse);
    const Grid1D& lab = basis.lab;
    const long n = lab.size();
    WaveFn2D psi = assemble_wavefn2d(basis.relative_ground, basis.cm_states.at(0), lab);

    const RealField k = wavenumbers(lab);
    const std::vector<double> weights = composition_weights(cfg.scheme);
    RealField kinetic_energy(n * n), static_potential(n * n);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
            kinetic_energy[i * n + j] = 0.5 * (k[i] * k[i] + k[j] * k[j]);
            const double x1 = lab.x(i), x2 = lab.x(j);
            static_potential[i * n + j] =
                0.5 * params.omega * params.omega * (x1 * x1 + x2 * x2) + soft_coulomb(x1 - x2, params);
        }
    }
    // Phase tables per distinct fraction of dt.
    std::vector<std::pair<double, ComplexGrid2D>> kinetic_tables, potential_tables;
    auto table = [&](std::vector<std::pair<double, ComplexGrid2D>>& cache, const RealField& e,
                     double fraction) -> const ComplexGrid2D& {
        for (const auto& [f, t] : cache)
            if (f == fraction) return t;
        ComplexGrid2D t(n, n);
        for (long i = 0; i < n * n; ++i) t.data()[i] = std::polar(1.0, -fraction * cfg.dt * e[i]);
        cache.emplace_back(fraction, std::move(t));
        return cache.back().second;
    };
    // Only validation numbers come from this path, so the faster timing-based plan is acceptable.
    FftPlan fft(n, n, FFTW_MEASURE);
    ComplexField dipole(n);

    Exact2DRun run;
    run.trace.grid = lab;
    run.trace.source = TraceSource::exact_2d;
    run.trace.tau = pulse.tau;
    bool warned = false;
    auto record = [&](double t) {
        run.trace.append(t, psi.one_particle_density());
        run.max_exchange_asymmetry = std::max(run.max_exchange_asymmetry, psi.exchange_asymmetry());
        run.max_norm_drift = std::max(run.max_norm_drift, std::abs(psi.norm_squared() - 1.0));
        if (t > pulse.tau) run.post_pulse_energies.push_back(lab_energy(psi, params, 0.0));
        const double edge = std::max({psi.amplitudes.row(0).cwiseAbs().maxCoeff(),
                                      psi.amplitudes.row(n - 1).cwiseAbs().maxCoeff(),
                                      psi.amplitudes.col(0).cwiseAbs().maxCoeff(),
                                      psi.amplitudes.col(n - 1).cwiseAbs().maxCoeff()});
        if (edge > 1e-6 && !warned) {
            run.trace.diagnostics.warn("two-electron wavefunction exceeds 1e-6 at the box edge");
            warned = true;
        }
    };

    auto kinetic = [&](double fraction) {
        fft.forward(psi.amplitudes.data());
        psi.amplitudes.array() *= table(kinetic_tables, kinetic_energy, fraction).array();
        fft.backward(psi.amplitudes.data());
    };
    auto potential = [&](double t_mid, double fraction) {
        const double field = pulse.field(t_mid);
        for (long i = 0; i < n; ++i) dipole[i] = std::polar(1.0, fraction * cfg.dt * field * lab.x(i));
        const ComplexGrid2D& phase = table(potential_tables, static_potential, fraction);
        for (long i = 0; i < n; ++i)
            psi.amplitudes.row(i).array() *= phase.row(i).array() * (dipole[i] * dipole.transpose()).array();
    };

    const long steps = cfg.steps();
    record(0.0);
    for (long s = 0; s < steps; ++s) {
        const double t = double(s) * cfg.dt;
        double elapsed = 0.0;
        kinetic(0.5 * weights.front());
        for (std::size_t i = 0; i < weights.size(); ++i) {
            const double w = weights[i];
            potential(t + (elapsed + 0.5 * w) * cfg.dt, w);
            elapsed += w;
            kinetic(0.5 * (w + (i + 1 < weights.size() ? weights[i + 1] : 0.0)));
        }
        if ((s + 1) % cfg.record_stride == 0 || s + 1 == steps) record(double(s + 1) * cfg.dt);
    }
    return run;
}

struct TdksRun {
    DensityTrace trace;
    std::vector<WaveFn1D> orbitals; // Phi(x, t) at the trace times
    double max_norm_drift = 0.0;
};

inline TraceSource tdks_source_for(XcTag tag) {
    return tag == XcTag::exact_inverted ? TraceSource::tdks_exact_vxc : TraceSource::tdks_exchange_sic;
}

/// Time-dependent Kohn-Sham evolution of the doubly occupied orbital.
///
/// Every Strang substep is a predictor-corrector pair: a trial substep with V[n] predicts the
/// density at its end, then the substep is redone from the same start with V evaluated on the
/// mean of the two densities. Time arguments are substep midpoints.
inline TdksRun propagate_tdks(const KsGroundState& ks0, const XcFunctional& xc, const ModelParams& params,
                              const Pulse& pulse, const PropagatorConfig& cfg) {
    cfg.validate(pulse);
    const Grid1D& grid = ks0.grid;
    WaveFn1D phi = ks0.orbital;
    check_kinetic_phase(phi.amplitudes, grid, 1.0, cfg.dt, max_abs_weight(cfg.scheme));

    const Eigen::MatrixXd kernel = hartree_kernel(grid, params);
    const RealField x = grid.points();
    SplitOperator1D prop(grid, 1.0, cfg.dt);
    const std::vector<double> weights = composition_weights(cfg.scheme);

    TdksRun run;
    run.trace.grid = grid;
    run.trace.source = tdks_source_for(xc.tag());
    run.trace.tau = pulse.tau;
    auto record = [&](double t) {
        run.trace.append(t, 2.0 * phi.probability());
        run.orbitals.push_back(phi);
    };

    const long steps = cfg.steps();
    record(0.0);
    ComplexField trial(grid.size());
    for (long s = 0; s < steps; ++s) {
        double t = double(s) * cfg.dt;
        for (double w : weights) {
            const double t_mid = t + 0.5 * w * cfg.dt;
            const RealField dipole = -pulse.field(t_mid) * x;
            const RealField n_now = 2.0 * phi.probability();

            trial = phi.amplitudes;
            prop.strang(trial, ks_potential(n_now, grid, params, xc, kernel, t_mid) + dipole, w);
            const RealField n_mid = 0.5 * (n_now + 2.0 * trial.cwiseAbs2());
            prop.strang(phi.amplitudes, ks_potential(n_mid, grid, params, xc, kernel, t_mid) + dipole, w);
            t += w * cfg.dt;
        }

        const double drift = std::abs(phi.norm_squared() - 1.0);
        run.max_norm_drift = std::max(run.max_norm_drift, drift);
        if (drift > 1e-6)
            throw NumericalError("TDKS norm drift " + std::to_string(drift) + " at t = " +
                                 std::to_string(double(s + 1) * cfg.dt));
        if ((s + 1) % cfg.record_stride == 0 || s + 1 == steps) record(double(s + 1) * cfg.dt);
    }
    if (boundary_amplitude(phi.amplitudes) > 1e-8) run.trace.diagnostics.warn("TDKS orbital reaches the box edge");
    return run;
}

} // namespace tdro
