#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "tdro/errors.hpp"
#include "tdro/grid.hpp"
#include "tdro/model.hpp"
#include "tdro/spectral.hpp"
#include "tdro/stationary.hpp"

namespace tdro {

/// W_ij = dx / sqrt(b + (x_i - x_j)^2), so V_H = W n.
inline Eigen::MatrixXd hartree_kernel(const Grid1D& grid, const ModelParams& params) {
    const long n = grid.size();
    Eigen::MatrixXd w(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) w(i, j) = soft_coulomb(grid.x(i) - grid.x(j), params) * grid.spacing();
    return w;
}

inline RealField hartree_potential(const RealField& density, const Grid1D& grid, const ModelParams& params) {
    return hartree_kernel(grid, params) * density;
}

inline RealField harmonic_potential(const Grid1D& grid, const ModelParams& params) {
    RealField v(grid.size());
    for (long j = 0; j < grid.size(); ++j) v[j] = 0.5 * params.omega * params.omega * grid.x(j) * grid.x(j);
    return v;
}

enum class XcTag { none, exchange_sic, exact_inverted };

inline std::string to_string(XcTag t) {
    switch (t) {
    case XcTag::none: return "none";
    case XcTag::exchange_sic: return "exchange_sic";
    case XcTag::exact_inverted: return "exact_inverted";
    }
    return "?";
}

/// Exchange-correlation model for the doubly occupied singlet orbital.
class XcFunctional {
public:
    virtual ~XcFunctional() = default;
    virtual XcTag tag() const = 0;
    /// False switches off the Hartree term as well (non-interacting reference).
    virtual bool uses_hartree() const { return true; }
    virtual RealField potential(const RealField& density, const RealField& hartree, double time) const = 0;
};

class NoInteraction final : public XcFunctional {
public:
    XcTag tag() const override { return XcTag::none; }
    bool uses_hartree() const override { return false; }
    RealField potential(const RealField& density, const RealField&, double) const override {
        return RealField::Zero(density.size());
    }
};

/// Self-interaction-corrected exchange for one doubly occupied orbital: V_xc = -V_H/2.
class ExchangeSic final : public XcFunctional {
public:
    XcTag tag() const override { return XcTag::exchange_sic; }
    RealField potential(const RealField&, const RealField& hartree, double) const override {
        return -0.5 * hartree;
    }
};

/// Samples f(x - shift) with 6-point Lagrange interpolation; the stencil is clamped at the edges.
inline RealField lagrange_shift(const RealField& f, const Grid1D& grid, double shift) {
    const long n = grid.size();
    const double dx = grid.spacing();
    constexpr int order = 6;
    RealField out(n);
    for (long i = 0; i < n; ++i) {
        const double s = (grid.x(i) - shift - grid.x(0)) / dx;
        long start = long(std::floor(s)) - order / 2 + 1;
        start = std::clamp(start, 0L, n - order);
        double acc = 0.0;
        for (int a = 0; a < order; ++a) {
            double w = 1.0;
            for (int c = 0; c < order; ++c)
                if (c != a) w *= (s - double(start + c)) / double(a - c);
            acc += w * f[start + a];
        }
        out[i] = acc;
    }
    return out;
}

/// Exact ground-state V_xc rigidly translated along a prescribed displacement d(t).
class ExactShift final : public XcFunctional {
public:
    using Displacement = std::function<double(double)>;

    ExactShift(Grid1D grid, RealField ground_vxc, Displacement displacement = {})
        : grid_(grid), ground_vxc_(std::move(ground_vxc)), displacement_(std::move(displacement)) {}

    XcTag tag() const override { return XcTag::exact_inverted; }

    RealField potential(const RealField&, const RealField&, double time) const override {
        const double d = displacement_ ? displacement_(time) : 0.0;
        if (d == 0.0) return ground_vxc_;
        return lagrange_shift(ground_vxc_, grid_, d);
    }

    const RealField& ground_vxc() const { return ground_vxc_; }

private:
    Grid1D grid_;
    RealField ground_vxc_;
    Displacement displacement_;
};

/// Lowest `count` eigenpairs of -1/2 d^2/dx^2 + V on the grid, sign-fixed and normalized.
inline std::vector<Eigenpair> solve_in_potential(const Grid1D& grid, const RealField& potential, int count,
                                                 const Eigen::MatrixXd* kinetic = nullptr) {
    Eigen::MatrixXd h = kinetic ? *kinetic : kinetic_matrix(grid, 1.0);
    h.diagonal() += potential;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    if (solver.info() != Eigen::Success) throw NumericalError("Kohn-Sham eigensolver failed");
    std::vector<Eigenpair> out;
    for (int m = 0; m < count; ++m) {
        ComplexField v = solver.eigenvectors().col(m).cast<complex>();
        fix_sign(v);
        WaveFn1D psi(grid, v);
        psi.normalize();
        out.push_back({solver.eigenvalues()[m], std::move(psi)});
    }
    return out;
}

struct KsGroundState {
    Grid1D grid;
    XcTag xc_model = XcTag::exchange_sic;
    WaveFn1D orbital;
    double orbital_energy = 0.0;
    RealField density;
    RealField ks_potential;
    RealField hartree;
    RealField xc_potential;
    std::vector<Eigenpair> virtuals;
    int iterations = 0;
    double density_change = 0.0;
    double residual = 0.0;
};

struct ScfOptions {
    double mixing = 0.3;
    double tolerance = 1e-10;
    int max_iterations = 2000;

    friend bool operator==(const ScfOptions&, const ScfOptions&) = default;
};

/// Effective KS potential V_ext + V_H[n] + V_xc[n] at time `time`.
inline RealField ks_potential(const RealField& density, const Grid1D& grid, const ModelParams& params,
                              const XcFunctional& xc, const Eigen::MatrixXd& kernel, double time = 0.0,
                              RealField* hartree_out = nullptr, RealField* xc_out = nullptr) {
    RealField vh = xc.uses_hartree() ? RealField(kernel * density) : RealField(RealField::Zero(grid.size()));
    RealField vxc = xc.potential(density, vh, time);
    RealField v = harmonic_potential(grid, params) + vh + vxc;
    if (hartree_out) *hartree_out = std::move(vh);
    if (xc_out) *xc_out = std::move(vxc);
    return v;
}

/// Self-consistent singlet ground state with linear density mixing.
inline KsGroundState ks_scf_ground_state(const ModelParams& params, const Grid1D& grid, const XcFunctional& xc,
                                         int n_virtuals, const ScfOptions& opts = {}) {
    params.validate();
    const Eigen::MatrixXd kernel = hartree_kernel(grid, params);
    const Eigen::MatrixXd kinetic = kinetic_matrix(grid, 1.0);

    RealField density = 2.0 * solve_in_potential(grid, harmonic_potential(grid, params), 1, &kinetic)[0]
                                  .state.probability();
    double change = 0.0;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const RealField v = ks_potential(density, grid, params, xc, kernel);
        const RealField out = 2.0 * solve_in_potential(grid, v, 1, &kinetic)[0].state.probability();
        change = l1_distance(out, density, grid);
        if (change < opts.tolerance) {
            density = out;
            break;
        }
        density = (1.0 - opts.mixing) * density + opts.mixing * out;
    }
    if (it == opts.max_iterations)
        throw NumericalError("Kohn-Sham SCF did not converge after " + std::to_string(it) +
                             " iterations, last density change " + std::to_string(change));

    KsGroundState gs;
    gs.grid = grid;
    gs.xc_model = xc.tag();
    gs.iterations = it + 1;
    gs.density_change = change;
    gs.ks_potential = ks_potential(density, grid, params, xc, kernel, 0.0, &gs.hartree, &gs.xc_potential);
    auto states = solve_in_potential(grid, gs.ks_potential, n_virtuals + 1, &kinetic);
    gs.orbital = states[0].state;
    gs.orbital_energy = states[0].energy;
    gs.density = 2.0 * gs.orbital.probability();
    gs.virtuals.assign(states.begin() + 1, states.end());

    // ||H[n(phi_0)] phi_0 - eps_0 phi_0|| with the potential rebuilt from the final orbital.
    const RealField v_final = ks_potential(gs.density, grid, params, xc, kernel);
    const ComplexField hphi = kinetic * gs.orbital.amplitudes + v_final.cwiseProduct(gs.orbital.amplitudes);
    gs.residual = std::sqrt((hphi - gs.orbital_energy * gs.orbital.amplitudes).squaredNorm() * grid.spacing());
    return gs;
}

struct KsInversion {
    RealField ks_potential;
    RealField xc_potential;
    long window_begin = 0; // first index with n > floor
    long window_end = 0;   // one past the last
};

/// Recovers V_KS from a singlet density via V_KS = eps + (1/2) phi''/phi with phi = sqrt(n/2).
/// V_xc = V_KS - V_ext - V_H is gauged so that its mean at the two window edges equals that of
/// -V_H/2 (the exchange tail) and is extended linearly outside the window n > density_floor.
inline KsInversion invert_ks_equation(const RealField& density, const ModelParams& params, const Grid1D& grid,
                                      double density_floor = 1e-8) {
    const long n = grid.size();
    if (density.size() != n) throw ConfigError("invert_ks_equation: density size != grid size");
    long begin = 0;
    while (begin < n && density[begin] <= density_floor) ++begin;
    long end = n;
    while (end > begin && density[end - 1] <= density_floor) --end;
    if (end - begin < 8) throw NumericalError("invert_ks_equation: density window too small");
    for (long j = begin; j < end; ++j)
        if (!(density[j] > density_floor))
            throw NumericalError("invert_ks_equation: density non-positive inside the window at x = " +
                                 std::to_string(grid.x(j)));

    WaveFn1D phi(grid, density.cwiseMax(0.0).cwiseSqrt().cast<complex>() / std::sqrt(2.0));
    const RealField tphi = apply_kinetic_spectral(phi, 1.0).amplitudes.real();
    const RealField vh = hartree_potential(density, grid, params);
    const RealField vext = harmonic_potential(grid, params);

    RealField vxc(n);
    for (long j = begin; j < end; ++j) vxc[j] = -tphi[j] / phi.amplitudes[j].real() - vext[j] - vh[j];
    const double edge_target = -0.25 * (vh[begin] + vh[end - 1]);
    const double edge_value = 0.5 * (vxc[begin] + vxc[end - 1]);
    vxc.segment(begin, end - begin).array() += edge_target - edge_value;

    const double left_slope = (vxc[begin + 1] - vxc[begin]) / grid.spacing();
    for (long j = 0; j < begin; ++j) vxc[j] = vxc[begin] + left_slope * (grid.x(j) - grid.x(begin));
    const double right_slope = (vxc[end - 1] - vxc[end - 2]) / grid.spacing();
    for (long j = end; j < n; ++j) vxc[j] = vxc[end - 1] + right_slope * (grid.x(j) - grid.x(end - 1));

    return {vext + vh + vxc, vxc, begin, end};
}

} // namespace tdro
