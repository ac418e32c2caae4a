#pragma once

#include <complex>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "tdro/errors.hpp"

namespace tdro {

using complex = std::complex<double>;
using RealField = Eigen::VectorXd;
using ComplexField = Eigen::VectorXcd;
using ComplexGrid2D = Eigen::Matrix<complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

/// Uniform periodic grid on [-extent, extent) with x_j = -extent + j*spacing.
class Grid1D {
public:
    Grid1D() = default;

    Grid1D(double extent, long n_points) : extent_(extent), n_points_(n_points) {
        if (!(extent > 0.0))
            throw ConfigError("grid extent must be positive");
        if (n_points < 16 || !is_power_of_two(n_points))
            throw ConfigError("grid point count must be a power of two >= 16, got " +
                              std::to_string(n_points));
    }

    long size() const { return n_points_; }
    double extent() const { return extent_; }
    double spacing() const { return 2.0 * extent_ / static_cast<double>(n_points_); }
    double x(long j) const { return -extent_ + static_cast<double>(j) * spacing(); }

    RealField points() const {
        RealField p(n_points_);
        for (long j = 0; j < n_points_; ++j) p[j] = x(j);
        return p;
    }

    /// Index of the grid point mirrored through x = 0 (periodic: x_0 = -L maps onto itself).
    long mirror(long j) const { return (n_points_ - j) % n_points_; }

    /// Companion grid for R = x1 + x2 and r = x1 - x2: twice the extent, same spacing.
    Grid1D pair_grid() const { return Grid1D(2.0 * extent_, 2 * n_points_); }

    friend bool operator==(const Grid1D& a, const Grid1D& b) {
        return a.n_points_ == b.n_points_ && a.extent_ == b.extent_;
    }

private:
    double extent_ = 1.0;
    long n_points_ = 16;
};

inline Grid1D make_grid(double extent, long n_points) { return Grid1D(extent, n_points); }

inline void require_same_grid(const Grid1D& a, const Grid1D& b, const char* where) {
    if (!(a == b)) throw ConfigError(std::string(where) + ": grid mismatch");
}

struct WaveFn1D {
    Grid1D grid;
    ComplexField amplitudes;

    WaveFn1D() = default;
    explicit WaveFn1D(const Grid1D& g) : grid(g), amplitudes(ComplexField::Zero(g.size())) {}
    WaveFn1D(const Grid1D& g, ComplexField a) : grid(g), amplitudes(std::move(a)) {
        if (amplitudes.size() != g.size()) throw ConfigError("WaveFn1D: amplitude count != grid size");
    }

    double norm_squared() const { return amplitudes.squaredNorm() * grid.spacing(); }
    double norm() const { return std::sqrt(norm_squared()); }
    bool is_normalized(double tol = 1e-12) const { return std::abs(norm_squared() - 1.0) <= tol; }

    WaveFn1D& normalize() {
        const double n = norm();
        if (!(n > 0.0)) throw NumericalError("cannot normalize a zero wavefunction");
        amplitudes /= n;
        return *this;
    }

    RealField probability() const { return amplitudes.cwiseAbs2(); }
};

/// Two-particle amplitude Psi(x1, x2) on a shared grid, row index = x1.
struct WaveFn2D {
    Grid1D grid;
    ComplexGrid2D amplitudes;

    WaveFn2D() = default;
    explicit WaveFn2D(const Grid1D& g)
        : grid(g), amplitudes(ComplexGrid2D::Zero(g.size(), g.size())) {}

    double norm_squared() const {
        const double dx = grid.spacing();
        return amplitudes.cwiseAbs2().sum() * dx * dx;
    }

    WaveFn2D& normalize() {
        const double n = std::sqrt(norm_squared());
        if (!(n > 0.0)) throw NumericalError("cannot normalize a zero wavefunction");
        amplitudes /= n;
        return *this;
    }

    /// max |Psi(x1,x2) - Psi(x2,x1)|
    double exchange_asymmetry() const {
        return (amplitudes - amplitudes.transpose()).cwiseAbs().maxCoeff();
    }

    /// n(x) = 2 * int |Psi(x, x2)|^2 dx2
    RealField one_particle_density() const {
        return 2.0 * grid.spacing() * amplitudes.cwiseAbs2().rowwise().sum();
    }
};

inline complex inner_product(const WaveFn1D& a, const WaveFn1D& b) {
    require_same_grid(a.grid, b.grid, "inner_product");
    return a.amplitudes.dot(b.amplitudes) * a.grid.spacing();
}

inline complex inner_product(const WaveFn2D& a, const WaveFn2D& b) {
    require_same_grid(a.grid, b.grid, "inner_product");
    const double dx = a.grid.spacing();
    return (a.amplitudes.conjugate().cwiseProduct(b.amplitudes)).sum() * dx * dx;
}

/// Rectangle rule, spectrally accurate for smooth decaying integrands.
inline double quadrature(const RealField& f, const Grid1D& grid) {
    if (f.size() != grid.size()) throw ConfigError("quadrature: field size != grid size");
    return f.sum() * grid.spacing();
}

inline double l1_distance(const RealField& a, const RealField& b, const Grid1D& grid) {
    return quadrature((a - b).cwiseAbs(), grid);
}

} // namespace tdro
