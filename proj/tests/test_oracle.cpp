#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "tdro/oracle.hpp"
#include "tdro/stationary.hpp"

using namespace tdro;

namespace {

const ModelParams kModel;
const Grid1D kLab = make_grid(15.0, 256);

RealField exact_ground_density() {
    const auto rel = solve_relative_eigenstates(kModel, kLab.pair_grid(), 1);
    return assemble_channel({0, 0}, rel, kModel, kLab).channel_density;
}

} // namespace

TEST(ClassicalTrajectory, FieldFreeStaysAtRest) {
    const auto traj = classical_trajectory([](double) { return 0.0; }, kModel, 0.01, 100.0);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        EXPECT_EQ(traj.position[k], 0.0);
        EXPECT_EQ(traj.momentum[k], 0.0);
    }
    EXPECT_EQ(classical_shift(0.0, traj), 0.0);
    EXPECT_EQ(classical_shift(57.3, traj), 0.0);
}

TEST(ClassicalTrajectory, RejectsCoarseSteps) {
    EXPECT_THROW(classical_trajectory(Pulse{}, kModel, 0.02, 100.0), ConfigError);
}

TEST(ClassicalTrajectory, AdiabaticStaticFieldReachesFixedPoint) {
    // F switched on over 2000 a.u. (sin^2), far slower than the 25 a.u. oscillator period.
    const double f0 = 0.01, ramp = 2000.0;
    auto field = [&](double t) {
        const double s = std::min(t / ramp, 1.0);
        return f0 * std::sin(0.5 * std::numbers::pi * s) * std::sin(0.5 * std::numbers::pi * s);
    };
    const auto traj = classical_trajectory(field, kModel, 0.01, ramp + 50.0);
    const double target = 2.0 * f0 / (kModel.omega * kModel.omega);
    EXPECT_NEAR(traj.position.back(), target, 1e-3 * target);
}

TEST(ClassicalTrajectory, AgreesWithDuhamelIntegral) {
    // Independent closed form: R(t) = (2/omega) int_0^t sin(omega (t - s)) F(s) ds, midpoint rule with fine step.
    const Pulse p;
    const auto traj = classical_trajectory(p, kModel, 0.01, p.tau);
    const double w = kModel.omega;
    double c = 0.0, s = 0.0;
    const double h = 1e-3;
    for (double u = 0.5 * h; u < p.tau; u += h) {
        c += std::cos(w * u) * p.field(u) * h;
        s += std::sin(w * u) * p.field(u) * h;
    }
    const double r_tau = 2.0 / w * (std::sin(w * p.tau) * c - std::cos(w * p.tau) * s);
    EXPECT_NEAR(traj.position.back(), r_tau, 1e-6);
    // Energy absorbed: E = |int F e^{i w s} ds|^2 (mass 1/2 bookkeeping), so lambda = E / w.
    EXPECT_NEAR(traj.mean_excitation(p.tau), (c * c + s * s) / w, 1e-8);
}

TEST(ClassicalTrajectory, BenchmarkPulseLambdaAndEnergyConservation) {
    const Pulse p;
    const auto a = classical_trajectory(p, kModel, 0.01, p.tau + 1000.0);
    const auto b = classical_trajectory(p, kModel, 0.005, p.tau + 1000.0);
    const double lambda = a.mean_excitation(p.tau);
    RecordProperty("lambda", std::to_string(lambda));
    EXPECT_NEAR(lambda, b.mean_excitation(p.tau), 1e-10);
    EXPECT_NEAR(lambda, 0.0133, 1e-4);
    const std::size_t k0 = a.index_at_or_after(p.tau);
    const double e0 = a.energy(k0);
    for (std::size_t k = k0; k < a.times.size(); ++k) EXPECT_NEAR(a.energy(k), e0, 1e-10 * e0);
}

TEST(ClassicalTrajectory, HermiteInterpolationBetweenSamples) {
    const Pulse p;
    const auto coarse = classical_trajectory(p, kModel, 0.01, 300.0);
    const auto fine = classical_trajectory(p, kModel, 0.001, 300.0);
    for (double t : {12.345, 100.0049, 250.5555}) {
        const std::size_t k = std::size_t(std::lround(t / 0.001));
        EXPECT_NEAR(coarse.position_at(fine.times[k]), fine.position[k], 1e-9);
    }
}

TEST(Poisson, ClosedFormsAndNormalization) {
    const auto p0 = poisson_probabilities(0.0, 5);
    EXPECT_EQ(p0[0], 1.0);
    for (int n = 1; n <= 5; ++n) EXPECT_EQ(p0[n], 0.0);
    EXPECT_NEAR(poisson_probabilities(1.0, 3)[0], std::exp(-1.0), 1e-15);
    EXPECT_NEAR(poisson_probabilities(1.0, 3)[0], 0.367879, 1e-6);
    for (double lambda : {0.01, 0.5, 1.0, 3.7, 10.0}) {
        const auto p = poisson_probabilities(lambda, 50);
        double sum = 0.0;
        for (double v : p) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-12) << lambda;
        const auto short_sum = poisson_probabilities(lambda, 3);
        EXPECT_LE(short_sum[0] + short_sum[1] + short_sum[2] + short_sum[3], 1.0 + 1e-15);
    }
    EXPECT_THROW(poisson_probabilities(-0.1, 3), ConfigError);
}

TEST(HptCheck, StationaryTraceIsZero) {
    const RealField n0 = exact_ground_density();
    DensityTrace trace;
    trace.grid = kLab;
    for (int k = 0; k < 5; ++k) trace.append(10.0 * k, n0);
    const auto traj = classical_trajectory([](double) { return 0.0; }, kModel, 0.01, 50.0);
    EXPECT_LT(hpt_check(trace, n0, traj), 1e-10);
}

TEST(HptCheck, RigidlyShiftedTracePassesCorruptedTraceFails) {
    const RealField n0 = exact_ground_density();
    const Pulse p;
    const auto traj = classical_trajectory(p, kModel, 0.01, 400.0);
    DensityTrace good, bad;
    good.grid = bad.grid = kLab;
    for (double t = 0.0; t <= 400.0; t += 20.0) {
        const RealField n = spectral_shift(n0, kLab, classical_shift(t, traj));
        good.append(t, n);
        RealField sq = n.cwiseProduct(n);
        sq *= 2.0 / quadrature(sq, kLab);
        bad.append(t, sq);
    }
    EXPECT_LT(hpt_check(good, n0, traj), 1e-10);
    EXPECT_GT(hpt_check(bad, n0, traj), 0.1);
}
