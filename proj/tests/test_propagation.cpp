#include <cmath>

#include <gtest/gtest.h>

#include "tdro/extraction.hpp"
#include "tdro/oracle.hpp"
#include "tdro/propagation.hpp"

using namespace tdro;

namespace {

const ModelParams kModel;
const Grid1D kLab = make_grid(15.0, 256);

const std::vector<Eigenpair>& relative_states() {
    static const auto s = solve_relative_eigenstates(kModel, kLab.pair_grid(), 2);
    return s;
}

const ExactBasis& basis() {
    static const ExactBasis b = make_exact_basis(kModel, kLab, 4, relative_states());
    return b;
}

Pulse no_field() {
    Pulse p;
    p.f0 = 0.0;
    return p;
}

// One-cycle ramps, 80 a.u. total: short enough for the full 2D propagator in a unit test.
Pulse short_pulse() {
    Pulse p;
    p.ramp_cycles = 1.0;
    p.tau = 80.0;
    return p;
}

PropagatorConfig config(double t_max, int stride = 25, double dt = 0.02) {
    PropagatorConfig c;
    c.t_max = t_max;
    c.record_stride = stride;
    c.dt = dt;
    return c;
}

const ExactRun& benchmark_run() {
    static const ExactRun run = propagate_exact_factorized(basis(), kModel, Pulse{}, config(Pulse{}.tau + 1000.0));
    return run;
}

const KsGroundState& sic_ground() {
    static const KsGroundState gs = ks_scf_ground_state(kModel, kLab, ExchangeSic{}, 2);
    return gs;
}

std::size_t index_of(const std::vector<double>& times, double t) {
    for (std::size_t k = 0; k < times.size(); ++k)
        if (std::abs(times[k] - t) < 1e-9) return k;
    throw std::runtime_error("time not recorded");
}

} // namespace

TEST(PropagatorConfig, Validation) {
    const Pulse p;
    EXPECT_NO_THROW(config(p.tau + 1000.0).validate(p));
    EXPECT_THROW(config(p.tau).validate(p), ConfigError);
    EXPECT_THROW(config(p.tau + 100.005).validate(p), ConfigError);
    EXPECT_THROW(config(p.tau + 100.0, 0).validate(p), ConfigError);
    EXPECT_THROW(config(p.tau + 100.0, 25, -0.1).validate(p), ConfigError);
}

TEST(PropagatorConfig, KineticPhaseGuard) {
    const WaveFn1D& h = basis().cm_states[0];
    EXPECT_NO_THROW(check_kinetic_phase(h.amplitudes, h.grid, 0.5, 0.02));
    EXPECT_THROW(check_kinetic_phase(h.amplitudes, h.grid, 0.5, 5.0), ConfigError);
}

TEST(ExactFactorized, FieldFreeGroundStateIsStationary) {
    const Pulse p = no_field();
    const ExactRun run = propagate_exact_factorized(basis(), kModel, p, config(p.tau + 200.0));
    for (const auto& a : run.cm_amplitudes) EXPECT_NEAR(std::abs(a[0]), 1.0, 1e-9);
    EXPECT_LT(run.max_norm_drift, 1e-10);
    // Strang splitting makes the sampled Hermite state breathe slightly, O(dt^2 omega^2).
    for (const auto& n : run.trace.densities) EXPECT_LT(l1_distance(n, run.trace.densities[0], kLab), 1e-5);
}

TEST(ExactFactorized, NormAndParticleNumberConserved) {
    const ExactRun& run = benchmark_run();
    EXPECT_LT(run.max_norm_drift, 1e-10);
    for (const auto& n : run.trace.densities) EXPECT_NEAR(quadrature(n, kLab), 2.0, 1e-7);
    EXPECT_TRUE(run.trace.diagnostics.empty());
    EXPECT_DOUBLE_EQ(run.trace.times.back(), Pulse{}.tau + 1000.0);
}

TEST(ExactFactorized, MatchesCoherentStateAtPulseEnd) {
    const Pulse p;
    const auto traj = classical_trajectory(p, kModel, 0.01, p.tau);
    const auto poisson = poisson_probabilities(traj.mean_excitation(p.tau), 4);
    const auto& amps = benchmark_run().cm_amplitudes[index_of(benchmark_run().trace.times, p.tau)];
    for (int n = 0; n <= 4; ++n) EXPECT_NEAR(std::norm(amps[n]), poisson[n], 1e-3) << "N = " << n;
}

TEST(ExactFactorized, PostPulseAmplitudesConstant) {
    const ExactRun& run = benchmark_run();
    const std::size_t k0 = index_of(run.trace.times, Pulse{}.tau);
    for (int n = 0; n <= 4; ++n) {
        double lo = 1e9, hi = -1e9;
        for (std::size_t k = k0; k < run.cm_amplitudes.size(); ++k) {
            lo = std::min(lo, std::abs(run.cm_amplitudes[k][n]));
            hi = std::max(hi, std::abs(run.cm_amplitudes[k][n]));
        }
        EXPECT_LT(hi - lo, 1e-8) << "N = " << n;
    }
}

TEST(ExactFactorized, HarmonicPotentialTheorem) {
    const Pulse p;
    const auto traj = classical_trajectory(p, kModel, 0.01, p.tau + 1000.0);
    EXPECT_LT(hpt_check(benchmark_run().trace, benchmark_run().trace.densities[0], traj), 1e-3);
}

TEST(ExactFactorized, PeakTracksClassicalShift) {
    const Pulse p;
    const auto traj = classical_trajectory(p, kModel, 0.01, p.tau + 1000.0);
    const DensityTrace& trace = benchmark_run().trace;
    // Follow the right-hand peak of the double-peaked ground density.
    auto right_peak = [&](const RealField& n, double centre) {
        long best = -1;
        for (long j = 0; j < kLab.size(); ++j)
            if (kLab.x(j) > centre && (best < 0 || n[j] > n[best])) best = j;
        return kLab.x(best);
    };
    const double x0 = right_peak(trace.densities[0], 0.0);
    for (std::size_t k = 0; k < trace.size(); k += trace.size() / 10) {
        const double d = classical_shift(trace.times[k], traj);
        EXPECT_NEAR(right_peak(trace.densities[k], d) - x0, d, 2.0 * kLab.spacing()) << "t = " << trace.times[k];
    }
}

TEST(ExactFactorized, TimeStepConvergenceOrder) {
    // sin^2 ramps keep F(t) smooth enough that envelope kinks do not mask the fourth order.
    Pulse p = short_pulse();
    p.ramp_shape = RampShape::sin2;
    auto final_p1 = [&](double dt, SplitScheme scheme) {
        PropagatorConfig c = config(p.tau + 20.0, 1000000, dt);
        c.scheme = scheme;
        const ExactRun run = propagate_exact_factorized(basis(), kModel, p, c);
        return std::norm(run.cm_amplitudes.back()[1]);
    };
    // Plain Strang: error ratio 4 per halving.
    const double a = final_p1(0.04, SplitScheme::strang), b = final_p1(0.02, SplitScheme::strang),
                 c = final_p1(0.01, SplitScheme::strang);
    EXPECT_NEAR(std::abs(a - b) / std::abs(b - c), 4.0, 0.5);
    // Triple jump: ratio 16, and halving the default step moves P by < 1e-6.
    EXPECT_LT(std::abs(final_p1(0.02, SplitScheme::triple_jump) - final_p1(0.01, SplitScheme::triple_jump)), 1e-6);
    const double d = final_p1(0.25, SplitScheme::triple_jump), e = final_p1(0.125, SplitScheme::triple_jump),
                 f = final_p1(0.0625, SplitScheme::triple_jump);
    EXPECT_NEAR(std::abs(d - e) / std::abs(e - f), 16.0, 3.0);
}

TEST(SplitScheme, NamesAndWeights) {
    EXPECT_EQ(split_scheme_from_string("strang"), SplitScheme::strang);
    EXPECT_EQ(split_scheme_from_string(to_string(SplitScheme::triple_jump)), SplitScheme::triple_jump);
    EXPECT_THROW(split_scheme_from_string("euler"), ConfigError);
    const auto w = composition_weights(SplitScheme::triple_jump);
    EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
    EXPECT_NEAR(2.0 * std::pow(w[0], 3) + std::pow(w[1], 3), 0.0, 1e-14);
}

TEST(Exact2D, AgreesWithFactorizedPath) {
    const Pulse p = short_pulse();
    const PropagatorConfig cfg = config(p.tau + 40.0, 300);
    const Exact2DRun full = propagate_exact_2d(basis(), kModel, p, cfg);
    const ExactRun fact = propagate_exact_factorized(basis(), kModel, p, cfg);
    ASSERT_EQ(full.trace.times, fact.trace.times);
    ASSERT_GE(full.trace.size(), 10u);
    for (std::size_t k = 0; k < full.trace.size(); ++k)
        EXPECT_LT(l1_distance(full.trace.densities[k], fact.trace.densities[k], kLab), 1e-4) << full.trace.times[k];
    EXPECT_LT(full.max_exchange_asymmetry, 1e-8);
    EXPECT_LT(full.max_norm_drift, 1e-9);
    ASSERT_FALSE(full.post_pulse_energies.empty());
    for (double e : full.post_pulse_energies) EXPECT_NEAR(e, full.post_pulse_energies.front(), 1e-6);
    EXPECT_TRUE(full.trace.diagnostics.empty());
}

TEST(Tdks, FieldFreeDensityStationary) {
    const Pulse p = no_field();
    const TdksRun run = propagate_tdks(sic_ground(), ExchangeSic{}, kModel, p, config(p.tau + 32.0));
    for (const auto& n : run.trace.densities) EXPECT_LT(l1_distance(n, run.trace.densities[0], kLab), 1e-6);
    EXPECT_LT(run.max_norm_drift, 1e-9);
    EXPECT_EQ(run.trace.source, TraceSource::tdks_exchange_sic);
}

TEST(Tdks, ExactShiftFunctionalReproducesExactDensity) {
    const Pulse p;
    const PropagatorConfig cfg = config(p.tau + 100.0, 50);
    const ExactRun exact = propagate_exact_factorized(basis(), kModel, p, cfg);
    const RealField& n0 = exact.trace.densities[0];
    const KsInversion inv = invert_ks_equation(n0, kModel, kLab);
    const auto traj = classical_trajectory(p, kModel, 0.01, cfg.t_max);
    const ExactShift xc(kLab, inv.xc_potential, [&traj](double t) { return classical_shift(t, traj); });

    // Ground orbital of the inverted potential: exact ground density, no SCF needed.
    KsGroundState ks0;
    ks0.grid = kLab;
    ks0.xc_model = XcTag::exact_inverted;
    ks0.orbital = solve_in_potential(kLab, inv.ks_potential, 1)[0].state;

    const TdksRun run = propagate_tdks(ks0, xc, kModel, p, cfg);
    ASSERT_EQ(run.trace.times, exact.trace.times);
    double worst = 0.0;
    for (std::size_t k = 0; k < run.trace.size(); ++k)
        worst = std::max(worst, l1_distance(run.trace.densities[k], exact.trace.densities[k], kLab));
    RecordProperty("max_l1_exact_shift", std::to_string(worst));
    EXPECT_LT(worst, 1e-2);
    EXPECT_EQ(run.trace.source, TraceSource::tdks_exact_vxc);
}

TEST(Tdks, ExchangeSicDeviationBand) {
    const Pulse p;
    const PropagatorConfig cfg = config(p.tau + 100.0, 50);
    const ExactRun exact = propagate_exact_factorized(basis(), kModel, p, cfg);
    const TdksRun run = propagate_tdks(sic_ground(), ExchangeSic{}, kModel, p, cfg);
    double worst = 0.0;
    for (std::size_t k = 0; k < run.trace.size(); ++k)
        worst = std::max(worst, l1_distance(run.trace.densities[k], exact.trace.densities[k], kLab));
    RecordProperty("max_l1_sic", std::to_string(worst));
    EXPECT_GT(worst, 0.05);
    EXPECT_LT(worst, 0.5);
    EXPECT_LT(run.max_norm_drift, 1e-9);
    for (const auto& n : run.trace.densities) EXPECT_NEAR(quadrature(n, kLab), 2.0, 1e-7);
}
