#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tdro/diagnostics.hpp"
#include "tdro/errors.hpp"
#include "tdro/grid.hpp"
#include "tdro/kohn_sham.hpp"
#include "tdro/model.hpp"
#include "tdro/propagation.hpp"
#include "tdro/stationary.hpp"
#include "tdro/trace.hpp"

namespace tdro {

enum class ProjectionMethod { exact_projection, ks_determinant_projection };

/// Channel occupation probabilities P_f(t) obtained by projecting a wavefunction.
struct ProjectionTrace {
    ProjectionMethod method = ProjectionMethod::exact_projection;
    std::vector<double> times;
    std::vector<std::vector<double>> probabilities; // [time][channel]

    std::size_t channel_count() const { return probabilities.empty() ? 0 : probabilities.front().size(); }

    std::vector<double> channel(std::size_t f) const {
        std::vector<double> out;
        for (const auto& row : probabilities) out.push_back(row.at(f));
        return out;
    }
};

/// Exact S-matrix by projection. The relative factor never evolves, so
/// <chi_(N,n)|Psi(t)> = <g_n|g_0> <h_N|h(t)>.
inline ProjectionTrace project_exact(const ExactRun& run, const ExactBasis& basis,
                                     const std::vector<ChannelState>& channels) {
    ProjectionTrace out;
    out.method = ProjectionMethod::exact_projection;
    out.times = run.trace.times;
    for (const auto& amps : run.cm_amplitudes) {
        std::vector<double> row;
        for (const auto& c : channels) {
            if (c.label.n_cm >= int(amps.size()))
                throw ConfigError("project_exact: amplitude trace lacks c.o.m. state " + std::to_string(c.label.n_cm));
            const double rel = std::norm(inner_product(c.rel_wavefn, basis.relative_ground));
            row.push_back(rel * std::norm(amps[c.label.n_cm]));
        }
        out.probabilities.push_back(std::move(row));
    }
    return out;
}

/// Projection of Phi(x1,t)Phi(x2,t) onto the singlet KS determinants |0,0>, |0,1>, ..., |0,n-1>.
inline ProjectionTrace project_ks_determinants(const std::vector<double>& times, const std::vector<WaveFn1D>& orbitals,
                                               const KsGroundState& ks0, int n_channels) {
    if (n_channels < 1 || n_channels > int(ks0.virtuals.size()) + 1)
        throw ConfigError("project_ks_determinants: not enough virtual orbitals for " +
                          std::to_string(n_channels) + " channels");
    if (times.size() != orbitals.size()) throw ConfigError("project_ks_determinants: times/orbitals size mismatch");
    ProjectionTrace out;
    out.method = ProjectionMethod::ks_determinant_projection;
    out.times = times;
    for (const auto& phi : orbitals) {
        const complex c0 = inner_product(ks0.orbital, phi);
        std::vector<double> row{std::norm(c0 * c0)};
        for (int m = 1; m < n_channels; ++m) {
            const complex cm = inner_product(ks0.virtuals[m - 1].state, phi);
            row.push_back(std::norm(std::sqrt(2.0) * c0 * cm));
        }
        out.probabilities.push_back(std::move(row));
    }
    return out;
}

enum class ReadoutMode { square_exact, least_squares };

inline std::string to_string(ReadoutMode m) { return m == ReadoutMode::square_exact ? "square_exact" : "least_squares"; }

inline ReadoutMode readout_mode_from_string(const std::string& s) {
    if (s == "square_exact") return ReadoutMode::square_exact;
    if (s == "least_squares") return ReadoutMode::least_squares;
    throw ConfigError("unknown readout mode '" + s + "'");
}

/// R_{f,j} = rho_ff(x_j) at the selected sample points.
struct RMatrix {
    Grid1D grid;
    ReadoutMode mode = ReadoutMode::square_exact;
    std::vector<long> points;        // grid indices
    Eigen::MatrixXd values;          // channels x points
    std::vector<RealField> channel_densities;
    double condition_number = 0.0;

    std::vector<double> positions() const {
        std::vector<double> x;
        for (long j : points) x.push_back(grid.x(j));
        return x;
    }
};

inline constexpr double kMaxReadoutCondition = 1e6;

namespace detail {

inline Eigen::MatrixXd sample_columns(const std::vector<RealField>& densities, const std::vector<long>& points) {
    Eigen::MatrixXd r(densities.size(), points.size());
    for (std::size_t f = 0; f < densities.size(); ++f)
        for (std::size_t j = 0; j < points.size(); ++j) r(f, j) = densities[f][points[j]];
    return r;
}

inline double smallest_singular_value(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()[svd.singularValues().size() - 1];
}

inline double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

/// Pair of channels whose densities are closest to collinear.
inline std::pair<int, int> most_collinear_pair(const std::vector<RealField>& densities) {
    std::pair<int, int> worst{0, densities.size() > 1 ? 1 : 0};
    double best = -1.0;
    for (std::size_t a = 0; a < densities.size(); ++a)
        for (std::size_t b = a + 1; b < densities.size(); ++b) {
            const double c = std::abs(densities[a].dot(densities[b])) /
                             std::max(densities[a].norm() * densities[b].norm(), 1e-300);
            if (c > best) {
                best = c;
                worst = {int(a), int(b)};
            }
        }
    return worst;
}

} // namespace detail

/// R matrix at given grid indices; throws NearSingularError when the condition number reaches 1e6.
inline RMatrix make_rmatrix(const std::vector<RealField>& densities, const Grid1D& grid, std::vector<long> points,
                            ReadoutMode mode) {
    if (points.size() < densities.size()) throw ConfigError("make_rmatrix: fewer points than channels");
    if (mode == ReadoutMode::square_exact && points.size() != densities.size())
        throw ConfigError("make_rmatrix: square mode needs exactly one point per channel");
    for (long j : points)
        if (j < 0 || j >= grid.size()) throw ConfigError("make_rmatrix: point index outside the grid");
    RMatrix r;
    r.grid = grid;
    r.mode = mode;
    r.points = std::move(points);
    r.values = detail::sample_columns(densities, r.points);
    r.channel_densities = densities;
    r.condition_number = detail::condition_number(r.values);
    if (!(r.condition_number < kMaxReadoutCondition)) {
        const auto [a, b] = detail::most_collinear_pair(densities);
        throw NearSingularError("read-out matrix is near-singular (condition " + std::to_string(r.condition_number) +
                                    "); channels " + std::to_string(a) + " and " + std::to_string(b) +
                                    " are not distinguishable at the sample points",
                                a, b);
    }
    return r;
}

/// Greedy sample-point design: start at the maximum of the first channel density, then repeatedly
/// add the point that maximizes the smallest singular value of the sampled R submatrix.
///
/// In least-squares mode with parity-even channel densities the greedy search runs over x >= 0
/// and every chosen point is paired with its mirror image (the count is rounded up to whole
/// pairs), so odd-parity cross terms in the averaged density cancel in the normal equations.
inline RMatrix select_sample_points(const std::vector<RealField>& densities, const Grid1D& grid, int n_points,
                                    ReadoutMode mode) {
    const int n_channels = int(densities.size());
    if (n_channels < 1) throw ConfigError("select_sample_points: no channels");
    if (n_points < n_channels) throw ConfigError("select_sample_points: need at least one point per channel");
    if (mode == ReadoutMode::square_exact && n_points != n_channels)
        throw ConfigError("select_sample_points: square mode needs exactly one point per channel");
    for (const auto& d : densities)
        if (d.size() != grid.size()) throw ConfigError("select_sample_points: density size != grid size");

    bool symmetric = mode == ReadoutMode::least_squares;
    for (const auto& d : densities)
        symmetric = symmetric && parity_of(d.cast<complex>(), grid, 1e-8) == 1;

    std::vector<long> candidates;
    for (long j = 0; j < grid.size(); ++j)
        if (!symmetric || grid.x(j) >= 0.0) candidates.push_back(j);

    std::vector<long> points;
    auto add = [&](long j) {
        if (std::find(points.begin(), points.end(), j) == points.end()) points.push_back(j);
        if (symmetric) {
            const long m = grid.mirror(j);
            if (std::find(points.begin(), points.end(), m) == points.end()) points.push_back(m);
        }
    };

    long first = candidates.front();
    for (long j : candidates)
        if (densities[0][j] > densities[0][first]) first = j;
    add(first);

    std::vector<long> base{first};
    while (int(points.size()) < n_points) {
        long best = -1;
        double best_value = -1.0;
        for (long j : candidates) {
            if (std::find(base.begin(), base.end(), j) != base.end()) continue;
            std::vector<long> trial = base;
            trial.push_back(j);
            const double s = detail::smallest_singular_value(detail::sample_columns(densities, trial));
            if (s > best_value) {
                best_value = s;
                best = j;
            }
        }
        if (best < 0) throw ConfigError("select_sample_points: ran out of candidate points");
        base.push_back(best);
        add(best);
    }

    return make_rmatrix(densities, grid, std::move(points), mode);
}

inline RMatrix select_sample_points(const std::vector<ChannelState>& channels, int n_points, ReadoutMode mode) {
    std::vector<RealField> d;
    for (const auto& c : channels) d.push_back(c.channel_density);
    return select_sample_points(d, channels.at(0).lab_grid, n_points, mode);
}

struct AveragedDensity {
    RealField field;
    double window = 0.0;
    Diagnostics diagnostics;
};

/// Trapezoidal average of n(x, t) over [tau, t_end]; endpoints between snapshots are interpolated.
inline AveragedDensity time_average_density(const DensityTrace& trace, double t_end, double min_gap = 0.0) {
    const double tau = trace.tau;
    if (!(t_end > tau)) throw ConfigError("time_average_density: t_end must exceed tau");
    if (trace.times.empty() || trace.times.front() > tau + 1e-12 || trace.times.back() < t_end - 1e-9)
        throw ConfigError("time_average_density: snapshots do not cover [tau, t_end]");

    AveragedDensity out;
    out.window = t_end - tau;
    RealField integral = RealField::Zero(trace.grid.size());
    double t_prev = tau;
    RealField n_prev = trace.at(tau);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double t = trace.times[k];
        if (t <= tau) continue;
        if (t >= t_end) break;
        integral += 0.5 * (t - t_prev) * (n_prev + trace.densities[k]);
        t_prev = t;
        n_prev = trace.densities[k];
    }
    const RealField n_end = trace.at(t_end);
    integral += 0.5 * (t_end - t_prev) * (n_prev + n_end);
    out.field = integral / out.window;
    if (min_gap > 0.0 && out.window < 2.0 * std::numbers::pi / min_gap)
        out.diagnostics.warn("averaging window shorter than one beat period of the closest channel pair");
    return out;
}

/// Transition probabilities read out of a time-averaged density.
struct ReadoutResult {
    double window = 0.0;
    std::vector<double> probabilities;
    double residual = 0.0;
    bool within_bounds = true; // every P in [-0.02, 1.02]
};

inline constexpr double kTruncationSlack = 0.02;

inline ReadoutResult invert_readout(const RealField& nbar, const RMatrix& r, double window = 0.0) {
    if (nbar.size() != r.grid.size()) throw ConfigError("invert_readout: density size != grid size");
    const long n_ch = r.values.rows();
    Eigen::VectorXd rhs(r.points.size());
    for (std::size_t j = 0; j < r.points.size(); ++j) rhs[j] = nbar[r.points[j]];

    const Eigen::MatrixXd a = r.values.transpose(); // points x channels
    Eigen::VectorXd p;
    if (r.mode == ReadoutMode::square_exact)
        p = a.partialPivLu().solve(rhs);
    else
        p = a.colPivHouseholderQr().solve(rhs);

    ReadoutResult out;
    out.window = window;
    RealField model = RealField::Zero(nbar.size());
    for (long f = 0; f < n_ch; ++f) {
        out.probabilities.push_back(p[f]);
        model += p[f] * r.channel_densities[f];
        if (p[f] < -kTruncationSlack || p[f] > 1.0 + kTruncationSlack) out.within_bounds = false;
    }
    out.residual = l1_distance(nbar, model, r.grid);
    return out;
}

/// One-particle transition densities rho_{f',f}(x) for a channel set, plus channel energies.
struct TransitionDensities {
    Grid1D grid;
    std::vector<double> energies;
    std::vector<std::vector<ComplexField>> rho; // rho[f'][f]

    explicit TransitionDensities(const std::vector<ChannelState>& channels) {
        grid = channels.at(0).lab_grid;
        const std::size_t n = channels.size();
        rho.assign(n, std::vector<ComplexField>(n));
        for (std::size_t a = 0; a < n; ++a) {
            energies.push_back(channels[a].energy);
            for (std::size_t b = a; b < n; ++b) {
                rho[a][b] = rdm_offdiagonal(channels[a], channels[b]);
                if (b != a) rho[b][a] = rho[a][b].conjugate();
            }
        }
    }

    std::size_t size() const { return energies.size(); }
};

/// n(x, t) = sum_{f',f} T_{f',f}(tau) exp(i (e_f' - e_f)(t - tau)) rho_{f',f}(x).
inline RealField synthesize_density(const Eigen::MatrixXcd& t_matrix, const TransitionDensities& td, double t,
                                    double tau) {
    const long n = long(td.size());
    if (t_matrix.rows() != n || t_matrix.cols() != n) throw ConfigError("synthesize_density: T has wrong shape");
    if ((t_matrix - t_matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("synthesize_density: T must be Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(t_matrix);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw ConfigError("synthesize_density: T must be positive semidefinite");
    if (t_matrix.trace().real() > 1.0 + 1e-12) throw ConfigError("synthesize_density: trace of T exceeds 1");

    ComplexField acc = ComplexField::Zero(td.grid.size());
    for (long a = 0; a < n; ++a)
        for (long b = 0; b < n; ++b) {
            if (t_matrix(a, b) == complex(0.0)) continue;
            const complex phase = std::polar(1.0, (td.energies[a] - td.energies[b]) * (t - tau));
            acc += (t_matrix(a, b) * phase) * td.rho[a][b];
        }
    if (acc.imag().cwiseAbs().maxCoeff() > 1e-10)
        throw NumericalError("synthesize_density: imaginary residue in the synthesized density");
    return acc.real();
}

/// T_{f',f} = a_{f'}^* a_f from projection amplitudes.
inline Eigen::MatrixXcd transition_density_matrix(const std::vector<complex>& amplitudes) {
    const long n = long(amplitudes.size());
    Eigen::MatrixXcd t(n, n);
    for (long a = 0; a < n; ++a)
        for (long b = 0; b < n; ++b) t(a, b) = std::conj(amplitudes[a]) * amplitudes[b];
    return t;
}

} // namespace tdro
