#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tdro/errors.hpp"
#include "tdro/grid.hpp"
#include "tdro/model.hpp"
#include "tdro/spectral.hpp"

namespace tdro {

struct Eigenpair {
    double energy = 0.0;
    WaveFn1D state;
};

/// Flips the sign so that the first component above 10% of the maximum is positive.
inline void fix_sign(ComplexField& v) {
    const double cut = 0.1 * v.cwiseAbs().maxCoeff();
    for (long j = 0; j < v.size(); ++j) {
        if (std::abs(v[j]) > cut) {
            if (v[j].real() < 0.0) v = -v;
            return;
        }
    }
}

/// Lowest `count` even-parity eigenpairs of H_rel = p_r^2 + omega^2 r^2/4 + 1/sqrt(b + r^2).
///
/// The Fourier-grid Hamiltonian is projected onto the even subspace spanned by
/// e_0, e_{N/2} (the two self-mirrored points r = -2L and r = 0) and (e_k + e_{N-k})/sqrt(2).
inline std::vector<Eigenpair> solve_relative_eigenstates(const ModelParams& params, const Grid1D& grid,
                                                         int count) {
    params.validate();
    if (grid.spacing() > 0.15)
        throw ConfigError("solve_relative_eigenstates: spacing above 0.15 does not resolve the soft-Coulomb core");
    const long n = grid.size();
    const long half = n / 2;
    const long dim = half + 1;
    if (count < 1 || count > dim / 4)
        throw ConfigError("solve_relative_eigenstates: requested " + std::to_string(count) +
                          " states, grid resolves at most " + std::to_string(dim / 4));

    Eigen::MatrixXd h = kinetic_matrix(grid, 0.5);
    h.diagonal() += relative_potential(grid, params);

    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, dim);
    basis(0, 0) = 1.0;
    basis(half, half) = 1.0;
    const double s = 1.0 / std::sqrt(2.0);
    for (long k = 1; k < half; ++k) {
        basis(k, k) = s;
        basis(n - k, k) = s;
    }
    const Eigen::MatrixXd h_even = basis.transpose() * h * basis;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h_even);
    if (solver.info() != Eigen::Success) throw NumericalError("relative eigensolver failed");

    std::vector<Eigenpair> out;
    for (int m = 0; m < count; ++m) {
        ComplexField v = (basis * solver.eigenvectors().col(m)).cast<complex>();
        fix_sign(v);
        WaveFn1D psi(grid, v);
        psi.normalize();
        if (boundary_amplitude(psi.amplitudes) > 1e-6 * psi.amplitudes.cwiseAbs().maxCoeff())
            throw ConfigError("solve_relative_eigenstates: state " + std::to_string(m) +
                              " reaches the box edge; enlarge the grid");
        out.push_back({solver.eigenvalues()[m], std::move(psi)});
    }
    return out;
}

/// Hermite function of the mass-1/2, frequency-omega oscillator in R (weight exp(-omega R^2/4)).
inline Eigenpair cm_eigenstate(int n_cm, const ModelParams& params, const Grid1D& grid) {
    if (n_cm < 0) throw ConfigError("cm_eigenstate: n_cm must be non-negative");
    const double a = 0.5 * params.omega;
    const double sa = std::sqrt(a);
    ComplexField v(grid.size());
    for (long j = 0; j < grid.size(); ++j) {
        const double y = sa * grid.x(j);
        double prev = 0.0;
        double cur = std::pow(a / std::numbers::pi, 0.25) * std::exp(-0.5 * y * y);
        for (int k = 0; k < n_cm; ++k) {
            const double next = std::sqrt(2.0 / (k + 1.0)) * y * cur - std::sqrt(k / (k + 1.0)) * prev;
            prev = cur;
            cur = next;
        }
        v[j] = cur;
    }
    WaveFn1D psi(grid, v);
    psi.normalize();
    return {params.omega * (n_cm + 0.5), std::move(psi)};
}

struct ChannelLabel {
    int n_cm = 0;
    int n_rel = 0;

    friend bool operator==(const ChannelLabel&, const ChannelLabel&) = default;
};

inline std::string to_string(const ChannelLabel& l) {
    return "(" + std::to_string(l.n_cm) + "," + std::to_string(l.n_rel) + ")";
}

/// Unperturbed eigenstate chi_f(x1,x2) = g_{n_rel}(x1-x2) h_{n_cm}(x1+x2).
struct ChannelState {
    ChannelLabel label;
    double energy = 0.0;
    Grid1D lab_grid;
    WaveFn1D rel_wavefn;
    WaveFn1D cm_wavefn;
    RealField channel_density;
};

inline ChannelState assemble_channel(ChannelLabel label, const std::vector<Eigenpair>& relative_states,
                                     const ModelParams& params, const Grid1D& lab) {
    if (label.n_rel < 0 || label.n_rel >= int(relative_states.size()))
        throw ConfigError("assemble_channel: relative state " + std::to_string(label.n_rel) + " not available");
    const Eigenpair& rel = relative_states[label.n_rel];
    require_pair_grid(lab, rel.state.grid, "assemble_channel");
    Eigenpair cm = cm_eigenstate(label.n_cm, params, rel.state.grid);
    ChannelState c;
    c.label = label;
    c.energy = cm.energy + rel.energy;
    c.lab_grid = lab;
    c.rel_wavefn = rel.state;
    c.cm_wavefn = std::move(cm.state);
    c.channel_density = lab_density_from_factorized(c.rel_wavefn, c.cm_wavefn, lab);
    return c;
}

/// Channels (0,0), (1,0), ..., (count-1, 0).
inline std::vector<ChannelState> cm_ladder_channels(int count, const std::vector<Eigenpair>& relative_states,
                                                    const ModelParams& params, const Grid1D& lab) {
    std::vector<ChannelState> out;
    for (int n = 0; n < count; ++n) out.push_back(assemble_channel({n, 0}, relative_states, params, lab));
    return out;
}

/// rho_{f1,f2}(x) = 2 int dx2 chi_{f1}^*(x, x2) chi_{f2}(x, x2).
inline ComplexField rdm_offdiagonal(const ChannelState& f1, const ChannelState& f2) {
    require_same_grid(f1.lab_grid, f2.lab_grid, "rdm_offdiagonal");
    const long n = f1.lab_grid.size();
    const ComplexField& g1 = f1.rel_wavefn.amplitudes;
    const ComplexField& h1 = f1.cm_wavefn.amplitudes;
    const ComplexField& g2 = f2.rel_wavefn.amplitudes;
    const ComplexField& h2 = f2.cm_wavefn.amplitudes;
    ComplexField rho(n);
    for (long i = 0; i < n; ++i) {
        complex acc = 0.0;
        for (long j = 0; j < n; ++j) {
            const long r = n + i - j;
            const long big_r = i + j;
            acc += std::conj(g1[r] * h1[big_r]) * (g2[r] * h2[big_r]);
        }
        rho[i] = 4.0 * f1.lab_grid.spacing() * acc;
    }
    return rho;
}

} // namespace tdro
