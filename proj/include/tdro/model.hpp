#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "tdro/errors.hpp"
#include "tdro/fft.hpp"
#include "tdro/grid.hpp"
#include "tdro/spectral.hpp"

namespace tdro {

/// Two electrons in a 1D harmonic well with soft-Coulomb repulsion 1/sqrt(b + r^2).
struct ModelParams {
    double omega = 0.25;
    double b = 0.55;

    void validate() const {
        if (!(omega > 0.0)) throw ConfigError("model.omega must be positive");
        if (!(b > 0.0)) throw ConfigError("model.b must be positive");
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline double soft_coulomb(double r, const ModelParams& p) { return 1.0 / std::sqrt(p.b + r * r); }

enum class RampShape { linear, sin2 };

inline std::string to_string(RampShape s) { return s == RampShape::linear ? "linear" : "sin2"; }

/// Trapezoidal-envelope dipole pulse F(t) = f0 env(t) sin(omega_l t + phase), zero outside [0, tau].
struct Pulse {
    double f0 = 0.07;
    double omega_l = 0.1839;
    double tau = 168.0;
    double ramp_cycles = 2.0;
    double carrier_phase = 0.0;
    RampShape ramp_shape = RampShape::linear;

    double period() const { return 2.0 * std::numbers::pi / omega_l; }
    double ramp_duration() const { return ramp_cycles * period(); }

    void validate() const {
        if (!(omega_l > 0.0)) throw ConfigError("pulse.omega_l must be positive");
        if (!(tau > 0.0)) throw ConfigError("pulse.tau must be positive");
        if (ramp_cycles < 0.0) throw ConfigError("pulse.ramp_cycles must be non-negative");
        if (2.0 * ramp_duration() > tau)
            throw ConfigError("pulse.tau shorter than turn-on plus turn-off ramps");
    }

    double envelope(double t) const {
        if (t <= 0.0 || t >= tau) return 0.0;
        const double ramp = ramp_duration();
        double s = 1.0;
        if (t < ramp)
            s = t / ramp;
        else if (t > tau - ramp)
            s = (tau - t) / ramp;
        if (ramp_shape == RampShape::sin2) {
            const double q = std::sin(0.5 * std::numbers::pi * s);
            return q * q;
        }
        return s;
    }

    double field(double t) const { return f0 * envelope(t) * std::sin(omega_l * t + carrier_phase); }

    friend bool operator==(const Pulse&, const Pulse&) = default;
};

inline double pulse_field(const Pulse& p, double t) { return p.field(t); }

inline void require_pair_grid(const Grid1D& lab, const Grid1D& pair, const char* where) {
    if (!(pair == lab.pair_grid()))
        throw ConfigError(std::string(where) +
                          ": relative/c.o.m. grid must have twice the lab extent and point count");
}

/// n(x) = 2 int |Psi(x, x2)|^2 dx2 for Psi(x1,x2) = sqrt(2) g(x1 - x2) h(x1 + x2).
/// The sqrt(2) is the Jacobian of (x1, x2) -> (r, R); with g and h normalized in r and R
/// the result integrates to 2.
inline RealField lab_density_from_factorized(const WaveFn1D& g, const WaveFn1D& h, const Grid1D& lab) {
    require_same_grid(g.grid, h.grid, "lab_density_from_factorized");
    require_pair_grid(lab, g.grid, "lab_density_from_factorized");
    const long n = lab.size();
    const RealField g2 = g.amplitudes.cwiseAbs2();
    const RealField h2 = h.amplitudes.cwiseAbs2();
    RealField density(n);
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long j = 0; j < n; ++j) acc += g2[n + i - j] * h2[i + j];
        density[i] = 4.0 * lab.spacing() * acc;
    }
    return density;
}

/// Parity of a function on a symmetric grid: +1 even, -1 odd, 0 neither (relative tolerance tol).
inline int parity_of(const ComplexField& f, const Grid1D& grid, double tol = 1e-8) {
    const double scale = std::max(f.cwiseAbs().maxCoeff(), 1e-300);
    double even_dev = 0.0, odd_dev = 0.0;
    for (long j = 0; j < grid.size(); ++j) {
        const complex mirrored = f[grid.mirror(j)];
        even_dev = std::max(even_dev, std::abs(f[j] - mirrored));
        odd_dev = std::max(odd_dev, std::abs(f[j] + mirrored));
    }
    if (even_dev <= tol * scale) return 1;
    if (odd_dev <= tol * scale) return -1;
    return 0;
}

/// Psi(x1, x2) = g(x1 - x2) h(x1 + x2) on the lab grid, renormalized.
inline WaveFn2D assemble_wavefn2d(const WaveFn1D& g, const WaveFn1D& h, const Grid1D& lab) {
    require_same_grid(g.grid, h.grid, "assemble_wavefn2d");
    require_pair_grid(lab, g.grid, "assemble_wavefn2d");
    if (parity_of(g.amplitudes, g.grid) != 1)
        throw ConfigError("assemble_wavefn2d: relative factor must be even (spatial singlet)");
    const long n = lab.size();
    WaveFn2D psi(lab);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) psi.amplitudes(i, j) = g.amplitudes[n + i - j] * h.amplitudes[i + j];
    psi.normalize();
    return psi;
}

/// Applies -(1/2)(d^2/dx1^2 + d^2/dx2^2) spectrally.
inline ComplexGrid2D apply_kinetic_2d(const ComplexGrid2D& psi, const Grid1D& grid) {
    const long n = grid.size();
    const RealField k = wavenumbers(grid);
    FftPlan fft(n, n);
    ComplexGrid2D work = psi;
    fft.forward(work.data());
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) work(i, j) *= 0.5 * (k[i] * k[i] + k[j] * k[j]);
    fft.backward(work.data());
    return work;
}

/// <Psi| H_lab |Psi> with field F for the full two-electron Hamiltonian.
inline double lab_energy(const WaveFn2D& psi, const ModelParams& p, double field = 0.0) {
    const Grid1D& g = psi.grid;
    const long n = g.size();
    const ComplexGrid2D tpsi = apply_kinetic_2d(psi.amplitudes, g);
    const double dx = g.spacing();
    complex acc = 0.0;
    for (long i = 0; i < n; ++i) {
        const double x1 = g.x(i);
        for (long j = 0; j < n; ++j) {
            const double x2 = g.x(j);
            const double v = 0.5 * p.omega * p.omega * (x1 * x1 + x2 * x2) - field * (x1 + x2) +
                             soft_coulomb(x1 - x2, p);
            acc += std::conj(psi.amplitudes(i, j)) * (tpsi(i, j) + v * psi.amplitudes(i, j));
        }
    }
    return acc.real() * dx * dx;
}

/// Potential of H_rel = p_r^2 + omega^2 r^2 / 4 + 1/sqrt(b + r^2) (kinetic mass 1/2).
inline RealField relative_potential(const Grid1D& grid, const ModelParams& p) {
    RealField v(grid.size());
    for (long j = 0; j < grid.size(); ++j) {
        const double r = grid.x(j);
        v[j] = 0.25 * p.omega * p.omega * r * r + soft_coulomb(r, p);
    }
    return v;
}

/// Potential of H_cm = P_R^2 + omega^2 R^2 / 4 - F R (kinetic mass 1/2).
inline RealField cm_potential(const Grid1D& grid, const ModelParams& p, double field = 0.0) {
    RealField v(grid.size());
    for (long j = 0; j < grid.size(); ++j) {
        const double r = grid.x(j);
        v[j] = 0.25 * p.omega * p.omega * r * r - field * r;
    }
    return v;
}

inline double expectation(const WaveFn1D& psi, const RealField& potential, double mass) {
    const WaveFn1D t = apply_kinetic_spectral(psi, mass);
    const complex kin = inner_product(psi, t);
    const double pot = (psi.amplitudes.cwiseAbs2().cwiseProduct(potential)).sum() * psi.grid.spacing();
    return kin.real() + pot;
}

} // namespace tdro
