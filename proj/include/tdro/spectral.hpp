#pragma once

#include <cmath>
#include <numbers>

#include "tdro/diagnostics.hpp"
#include "tdro/fft.hpp"
#include "tdro/grid.hpp"

namespace tdro {

/// Angular wavenumbers in FFTW output order (0, 1, ..., n/2-1, -n/2, ..., -1) * 2pi/(n dx).
inline RealField wavenumbers(const Grid1D& grid) {
    const long n = grid.size();
    const double dk = 2.0 * std::numbers::pi / (double(n) * grid.spacing());
    RealField k(n);
    for (long j = 0; j < n; ++j) k[j] = dk * double(j < n / 2 ? j : j - n);
    return k;
}

/// Largest |psi| over the first and last `width` grid points.
inline double boundary_amplitude(const ComplexField& psi, long width = 2) {
    const long n = psi.size();
    double m = 0.0;
    for (long j = 0; j < width && j < n; ++j)
        m = std::max({m, std::abs(psi[j]), std::abs(psi[n - 1 - j])});
    return m;
}

/// (-1/(2 mass)) d^2 psi / dx^2 evaluated in the Fourier basis.
inline WaveFn1D apply_kinetic_spectral(const WaveFn1D& psi, double mass, Diagnostics* diag = nullptr) {
    if (boundary_amplitude(psi.amplitudes) > 1e-8)
        warn_to(diag, "apply_kinetic_spectral: boundary amplitude above 1e-8, periodic images overlap");
    const RealField k = wavenumbers(psi.grid);
    FftPlan fft(psi.grid.size());
    WaveFn1D out = psi;
    fft.forward(out.amplitudes.data());
    out.amplitudes.array() *= (k.array().square() / (2.0 * mass)).cast<complex>();
    fft.backward(out.amplitudes.data());
    return out;
}

/// Dense Fourier-grid kinetic matrix consistent with apply_kinetic_spectral.
inline Eigen::MatrixXd kinetic_matrix(const Grid1D& grid, double mass) {
    const long n = grid.size();
    const RealField k = wavenumbers(grid);
    FftPlan fft(n);
    Eigen::MatrixXd t(n, n);
    ComplexField column(n);
    for (long j = 0; j < n; ++j) {
        column.setZero();
        column[j] = 1.0;
        fft.forward(column.data());
        column.array() *= (k.array().square() / (2.0 * mass)).cast<complex>();
        fft.backward(column.data());
        t.col(j) = column.real();
    }
    return 0.5 * (t + t.transpose());
}

/// Returns f(x - shift) by Fourier interpolation; f must decay to ~0 at the box edges.
inline RealField spectral_shift(const RealField& f, const Grid1D& grid, double shift) {
    const RealField k = wavenumbers(grid);
    const long n = grid.size();
    ComplexField work = f.cast<complex>();
    FftPlan fft(n);
    fft.forward(work.data());
    for (long j = 0; j < n; ++j) {
        // Nyquist mode has no sign of its own; drop the odd part to keep the result real.
        const double kj = (j == n / 2) ? 0.0 : k[j];
        work[j] *= std::polar(1.0, -kj * shift);
    }
    fft.backward(work.data());
    return work.real();
}

/// Highest |k| (in FFT units) still carrying a fraction `tail` of the spectral power.
inline double effective_wavenumber(const ComplexField& psi, const Grid1D& grid, double tail = 1e-14) {
    const RealField k = wavenumbers(grid);
    ComplexField work = psi;
    FftPlan fft(grid.size());
    fft.forward(work.data());
    const RealField power = work.cwiseAbs2();
    const double total = power.sum();
    if (!(total > 0.0)) return 0.0;
    double kmax = 0.0;
    for (long j = 0; j < grid.size(); ++j)
        if (power[j] > tail * total) kmax = std::max(kmax, std::abs(k[j]));
    return kmax;
}

} // namespace tdro
