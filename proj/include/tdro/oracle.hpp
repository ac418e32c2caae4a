#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tdro/errors.hpp"
#include "tdro/grid.hpp"
#include "tdro/model.hpp"
#include "tdro/spectral.hpp"
#include "tdro/trace.hpp"

namespace tdro {

/// Classical c.o.m. motion of H_cm = P^2 + omega^2 R^2/4 - F(t) R, starting at rest.
struct ClassicalTrajectory {
    double omega = 0.0;
    std::vector<double> times;
    std::vector<double> position; // R_cl
    std::vector<double> momentum; // P_cl

    double energy(std::size_t k) const {
        return momentum[k] * momentum[k] + 0.25 * omega * omega * position[k] * position[k];
    }

    /// Cubic Hermite interpolation of R_cl using dR/dt = 2P.
    double position_at(double t) const {
        if (times.empty()) return 0.0;
        if (t <= times.front()) return position.front();
        if (t >= times.back()) return position.back();
        const std::size_t k = std::size_t(std::upper_bound(times.begin(), times.end(), t) - times.begin()) - 1;
        const double h = times[k + 1] - times[k];
        const double s = (t - times[k]) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        const double h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s);
        const double h11 = s * s * (s - 1);
        return h00 * position[k] + h10 * h * 2.0 * momentum[k] + h01 * position[k + 1] +
               h11 * h * 2.0 * momentum[k + 1];
    }

    std::size_t index_at_or_after(double t) const {
        std::size_t k = 0;
        while (k + 1 < times.size() && times[k] < t - 1e-12) ++k;
        return k;
    }

    /// Mean excitation number lambda = E_cl / omega at the first sample at or after t.
    double mean_excitation(double t) const { return energy(index_at_or_after(t)) / omega; }
};

using FieldFunction = std::function<double(double)>;

/// RK4 integration of dR/dt = 2P, dP/dt = -omega^2 R/2 + F(t).
///
/// Steps never straddle a breakpoint (kinks of F), so fourth order survives piecewise-smooth pulses.
inline ClassicalTrajectory classical_trajectory(const FieldFunction& field, const ModelParams& params, double dt,
                                                double t_max, std::vector<double> breakpoints = {}) {
    if (!(dt > 0.0) || dt > 0.01) throw ConfigError("classical_trajectory: oracle step must be in (0, 0.01]");
    if (!(t_max > 0.0)) throw ConfigError("classical_trajectory: t_max must be positive");
    std::erase_if(breakpoints, [&](double b) { return !(b > 0.0 && b < t_max); });
    breakpoints.push_back(t_max);
    std::sort(breakpoints.begin(), breakpoints.end());
    const double w2 = params.omega * params.omega;

    ClassicalTrajectory traj;
    traj.omega = params.omega;
    double r = 0.0, p = 0.0, t = 0.0;
    traj.times.push_back(0.0);
    traj.position.push_back(r);
    traj.momentum.push_back(p);
    auto dp = [&](double tt, double rr) { return -0.5 * w2 * rr + field(tt); };
    for (double end : breakpoints) {
        if (end - t < 1e-12) continue;
        const double t0 = t;
        const long steps = long(std::ceil((end - t0) / dt - 1e-9));
        const double h = (end - t0) / double(steps);
        for (long s = 0; s < steps; ++s) {
            t = t0 + h * double(s);
            const double k1r = 2.0 * p, k1p = dp(t, r);
            const double k2r = 2.0 * (p + 0.5 * h * k1p), k2p = dp(t + 0.5 * h, r + 0.5 * h * k1r);
            const double k3r = 2.0 * (p + 0.5 * h * k2p), k3p = dp(t + 0.5 * h, r + 0.5 * h * k2r);
            const double k4r = 2.0 * (p + h * k3p), k4p = dp(t + h, r + h * k3r);
            r += h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
            p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
            traj.times.push_back(s + 1 == steps ? end : t0 + h * double(s + 1));
            traj.position.push_back(r);
            traj.momentum.push_back(p);
        }
        t = end;
    }
    return traj;
}

inline ClassicalTrajectory classical_trajectory(const Pulse& pulse, const ModelParams& params, double dt,
                                                double t_max) {
    return classical_trajectory([&pulse](double t) { return pulse.field(t); }, params, dt, t_max,
                                {pulse.ramp_duration(), pulse.tau - pulse.ramp_duration(), pulse.tau});
}

/// Single-particle density displacement d(t) = R_cl(t)/2.
inline double classical_shift(double t, const ClassicalTrajectory& traj) { return 0.5 * traj.position_at(t); }

/// Coherent-state occupations P_N = exp(-lambda) lambda^N / N!, N = 0..n_max.
inline std::vector<double> poisson_probabilities(double lambda, int n_max) {
    if (lambda < 0.0) throw ConfigError("poisson_probabilities: lambda must be non-negative");
    std::vector<double> p(n_max + 1, 0.0);
    if (lambda == 0.0) {
        p[0] = 1.0;
        return p;
    }
    for (int n = 0; n <= n_max; ++n) p[n] = std::exp(-lambda + n * std::log(lambda) - std::lgamma(n + 1.0));
    return p;
}

/// max_t L1(n(x,t) - n_ground(x - R_cl(t)/2)), sub-grid shifts by Fourier interpolation.
inline double hpt_check(const DensityTrace& trace, const RealField& ground_density, const ClassicalTrajectory& traj) {
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const RealField shifted = spectral_shift(ground_density, trace.grid, classical_shift(trace.times[k], traj));
        worst = std::max(worst, l1_distance(trace.densities[k], shifted, trace.grid));
    }
    return worst;
}

} // namespace tdro
