#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "tdro/model.hpp"
#include "tdro/stationary.hpp"

using namespace tdro;

namespace {

const ModelParams kModel;
const Grid1D kLab = make_grid(15.0, 256);
const Grid1D kPair = kLab.pair_grid();

const std::vector<Eigenpair>& relative_states() {
    static const auto states = solve_relative_eigenstates(kModel, kPair, 4);
    return states;
}

// Periodic sinc (Fourier-grid) kinetic matrix in closed form, independent of the FFT route.
Eigen::MatrixXd sinc_kinetic(long n, double dx, double mass) {
    const double box = double(n) * dx;
    const double pi = std::numbers::pi;
    Eigen::MatrixXd t(n, n);
    for (long j = 0; j < n; ++j) {
        for (long k = 0; k < n; ++k) {
            if (j == k) {
                t(j, k) = (pi / dx) * (pi / dx) * (1.0 + 2.0 / double(n * n)) / 3.0 / (2.0 * mass);
            } else {
                const double s = std::sin(pi * double(j - k) / double(n));
                const double sign = ((j - k) % 2 == 0) ? 1.0 : -1.0;
                t(j, k) = sign * 2.0 * (pi / box) * (pi / box) / (s * s) / (2.0 * mass);
            }
        }
    }
    return t;
}

double hermite_function(int n, double a, double x) {
    const double y = std::sqrt(a) * x;
    double prev = 0.0;
    double cur = std::pow(a / std::numbers::pi, 0.25) * std::exp(-0.5 * y * y);
    for (int k = 0; k < n; ++k) {
        const double next = std::sqrt(2.0 / (k + 1.0)) * y * cur - std::sqrt(k / (k + 1.0)) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

int sign_changes(const WaveFn1D& psi) {
    const double cut = 1e-6 * psi.amplitudes.cwiseAbs().maxCoeff();
    int changes = 0;
    double last = 0.0;
    for (long j = 0; j < psi.amplitudes.size(); ++j) {
        const double v = psi.amplitudes[j].real();
        if (std::abs(v) < cut) continue;
        if (last != 0.0 && v * last < 0.0) ++changes;
        last = v;
    }
    return changes;
}

} // namespace

TEST(RelativeEigenstates, LargeBLimitIsShiftedOscillator) {
    ModelParams m;
    m.b = 1e6;
    const auto states = solve_relative_eigenstates(m, kPair, 1);
    EXPECT_NEAR(states[0].energy, m.omega / 2 + 1.0 / std::sqrt(m.b), 1e-4);
}

TEST(RelativeEigenstates, GroundEnergyAgreesWithDoubledResolution) {
    // Independent oracle: full (parity-unrestricted) dense diagonalization on 1024 points over the same box.
    const long n = 1024;
    const double dx = 2.0 * kPair.extent() / double(n);
    Eigen::MatrixXd h = sinc_kinetic(n, dx, 0.5);
    for (long j = 0; j < n; ++j) {
        const double r = -kPair.extent() + double(j) * dx;
        h(j, j) += 0.25 * kModel.omega * kModel.omega * r * r + soft_coulomb(r, kModel);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
    EXPECT_NEAR(relative_states()[0].energy, solver.eigenvalues()[0], 1e-6);
}

TEST(RelativeEigenstates, EvenParityAscendingAndNodeCount) {
    const auto& states = relative_states();
    for (std::size_t m = 0; m < states.size(); ++m) {
        const WaveFn1D& psi = states[m].state;
        double odd = 0.0;
        for (long j = 0; j < kPair.size(); ++j)
            odd = std::max(odd, std::abs(psi.amplitudes[j] - psi.amplitudes[kPair.mirror(j)]));
        EXPECT_LT(odd, 1e-10);
        EXPECT_NEAR(psi.norm_squared(), 1.0, 1e-12);
        EXPECT_EQ(sign_changes(psi), int(2 * m));
        EXPECT_NEAR(psi.amplitudes.imag().cwiseAbs().maxCoeff(), 0.0, 0.0);
        if (m > 0) EXPECT_GT(states[m].energy, states[m - 1].energy);
    }
}

TEST(RelativeEigenstates, RejectsUnresolvableRequests) {
    EXPECT_THROW(solve_relative_eigenstates(kModel, kPair, 1000), ConfigError);
    EXPECT_THROW(solve_relative_eigenstates(kModel, make_grid(30.0, 256), 1), ConfigError);
    EXPECT_THROW(solve_relative_eigenstates(kModel, make_grid(4.0, 64), 2), ConfigError);
}

TEST(CmEigenstate, EnergiesAndOrthonormality) {
    EXPECT_DOUBLE_EQ(cm_eigenstate(0, kModel, kPair).energy, 0.125);
    EXPECT_DOUBLE_EQ(cm_eigenstate(2, kModel, kPair).energy, 0.625);
    std::vector<WaveFn1D> h;
    for (int n = 0; n <= 5; ++n) h.push_back(cm_eigenstate(n, kModel, kPair).state);
    for (int a = 0; a <= 5; ++a)
        for (int b = 0; b <= 5; ++b)
            EXPECT_NEAR(std::abs(inner_product(h[a], h[b])), a == b ? 1.0 : 0.0, 1e-10);
    EXPECT_THROW(cm_eigenstate(-1, kModel, kPair), ConfigError);
}

TEST(CmEigenstate, IsEigenstateOfDiscreteHamiltonian) {
    const RealField v = cm_potential(kPair, kModel, 0.0);
    for (int n = 0; n <= 4; ++n) {
        const Eigenpair e = cm_eigenstate(n, kModel, kPair);
        EXPECT_NEAR(expectation(e.state, v, 0.5), e.energy, 1e-10);
    }
}

TEST(Channels, GroundChannelSymmetricWithTwoElectrons) {
    const ChannelState c = assemble_channel({0, 0}, relative_states(), kModel, kLab);
    EXPECT_NEAR(quadrature(c.channel_density, kLab), 2.0, 1e-8);
    for (long j = 1; j < kLab.size(); ++j)
        EXPECT_NEAR(c.channel_density[j], c.channel_density[kLab.mirror(j)], 1e-12);
}

TEST(Channels, ExcitedChannelMatchesDirect2DQuadrature) {
    const ChannelState c = assemble_channel({1, 0}, relative_states(), kModel, kLab);
    const long n = kLab.size();
    const double dx = kLab.spacing();
    Eigen::MatrixXd chi2(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            const double g = relative_states()[0].state.amplitudes[n + i - j].real();
            const double h = hermite_function(1, 0.5 * kModel.omega, kLab.x(i) + kLab.x(j));
            chi2(i, j) = g * g * h * h;
        }
    chi2 /= chi2.sum() * dx * dx;
    const RealField direct = 2.0 * dx * chi2.rowwise().sum();
    EXPECT_LT((direct - c.channel_density).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Channels, LadderSpacingAndEnergyExpectation) {
    const auto ch = cm_ladder_channels(3, relative_states(), kModel, kLab);
    EXPECT_NEAR(ch[2].energy - ch[1].energy, kModel.omega, 1e-10);
    EXPECT_NEAR(ch[1].energy - ch[0].energy, kModel.omega, 1e-10);
    for (const auto& c : ch) {
        const WaveFn2D psi = assemble_wavefn2d(c.rel_wavefn, c.cm_wavefn, kLab);
        EXPECT_NEAR(lab_energy(psi, kModel, 0.0), c.energy, 1e-8) << to_string(c.label);
    }
    const ChannelState rel_excited = assemble_channel({0, 1}, relative_states(), kModel, kLab);
    EXPECT_GT(rel_excited.energy, ch[0].energy);
    EXPECT_THROW(assemble_channel({0, 9}, relative_states(), kModel, kLab), ConfigError);
}

TEST(RdmOffdiagonal, DiagonalTraceHermiticityAndParity) {
    const auto ch = cm_ladder_channels(3, relative_states(), kModel, kLab);
    const ComplexField d = rdm_offdiagonal(ch[1], ch[1]);
    EXPECT_LT((d.real() - ch[1].channel_density).cwiseAbs().maxCoeff(), 1e-12);

    const ComplexField r01 = rdm_offdiagonal(ch[0], ch[1]);
    const ComplexField r10 = rdm_offdiagonal(ch[1], ch[0]);
    EXPECT_LT((r01 - r10.conjugate()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(std::abs(r01.sum() * kLab.spacing()), 0.0, 1e-8);
    EXPECT_NEAR(std::abs(rdm_offdiagonal(ch[0], ch[2]).sum() * kLab.spacing()), 0.0, 1e-8);

    // (0,0)-(1,0) transition density is odd in x; (0,0)-(2,0) is even.
    const ComplexField r02 = rdm_offdiagonal(ch[0], ch[2]);
    double odd_err = 0.0, even_err = 0.0;
    for (long j = 1; j < kLab.size(); ++j) {
        odd_err = std::max(odd_err, std::abs(r01[j] + r01[kLab.mirror(j)]));
        even_err = std::max(even_err, std::abs(r02[j] - r02[kLab.mirror(j)]));
    }
    EXPECT_LT(odd_err, 1e-12);
    EXPECT_LT(even_err, 1e-12);
    EXPECT_GT(r01.cwiseAbs().maxCoeff(), 1e-2);
}
