#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "qomsim/spectra.hpp"

using namespace qomsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Tuned cavity with Theta = gamma for a free mass.
OpticalParams tuned_cavity(double gamma, double M, double theta_over_gamma = 1.0) {
    OpticalParams o;
    o.L = 4000;
    o.gamma = gamma;
    o.Delta = 0;
    o.I_c = OpticalParams::power_for_theta(theta_over_gamma * gamma, M, o.L, o.omega0);
    return o;
}

}  // namespace

TEST_CASE("standard quantum limits") {
    const MechanicalParams free = MechanicalParams::free_mass(10);
    const double W = 2 * kPi * 100;
    CHECK_THAT(sql_displacement(free, W), WithinRel(2 * kHbar / (10 * W * W), 1e-14));
    CHECK_THAT(sql_force(free, W), WithinRel(2 * kHbar * 10 * W * W, 1e-14));
    CHECK_THAT(sql_strain(free, W, 4000), WithinRel(2 * kHbar / (10 * W * W * 4000.0 * 4000.0), 1e-14));

    const MechanicalParams osc{1.0, 50.0, 0, 0};
    CHECK(sql_force(osc, 50.0) == 0);
    CHECK(std::isinf(sql_displacement(osc, 50.0)));
    // narrowband suppression of the strain SQL near resonance
    for (double d : {1e-2, 1e-3, 1e-4}) {
        const double Wd = 50.0 * (1 + d);
        const double ratio = sql_strain(osc, Wd, 1) / sql_strain(MechanicalParams::free_mass(1.0), Wd, 1);
        CHECK_THAT(ratio, WithinRel(std::abs(Wd * Wd - 2500.0) / (Wd * Wd), 1e-12));
        CHECK(ratio < 3 * d);
    }
}

TEST_CASE("Kimble factor") {
    const double g = 2 * kPi * 100, M = 10;
    const OpticalParams o = tuned_cavity(g, M);
    const MechanicalParams m = MechanicalParams::free_mass(M);
    CHECK_THAT(kimble_factor(o, m, g).K, WithinRel(1.0, 1e-10));
    CHECK(kimble_factor(o, m, 1e6 * g).K < 1e-20);
    CHECK(std::abs(std::abs(kimble_factor(o, m, 0.3 * g).phase()) - 1) < 1e-15);
    // beta from e^{2i beta} = (W - i g)/(W + i g)
    const double W = 0.7 * g;
    const cplx ref = cplx(W, -g) / cplx(W, g);
    CHECK_THAT(std::abs(kimble_factor(o, m, W).phase() - ref), WithinAbs(0, 1e-14));

    OpticalParams o2 = o;
    o2.I_c *= 2;
    for (double w : {0.1 * g, g, 5 * g}) CHECK_THAT(kimble_factor(o2, m, w).K, WithinRel(2 * kimble_factor(o, m, w).K, 1e-12));

    OpticalParams det = o;
    det.Delta = 0.1 * g;
    CHECK_THROWS_AS(kimble_factor(det, m, g), DomainError);
}

TEST_CASE("tuned phase readout noise") {
    const double g = 2 * kPi * 100, M = 10;
    const OpticalParams o = tuned_cavity(g, M);
    const MechanicalParams m = MechanicalParams::free_mass(M);
    MeasurementParams phase;  // zeta = pi/2, vacuum

    CHECK_THAT(tuned_readout_noise(o, m, phase, g).S_F / sql_force(m, g), WithinRel(1.0, 1e-10));

    // K = 10 and K = 0.1 both give 5.05 S_SQL; oracle propagates the input covariance
    for (double target : {10.0, 0.1}) {
        // solve 2 g^4/(W^2 (W^2+g^2)) = target for W
        const double y = (-1 + std::sqrt(1 + 8 / target)) / 2;  // W^2/g^2
        const double W = g * std::sqrt(y);
        const double K = kimble_factor(o, m, W).K;
        REQUIRE_THAT(K, WithinRel(target, 1e-10));
        Eigen::Vector2d v(std::cos(phase.zeta) - K * std::sin(phase.zeta), std::sin(phase.zeta));
        const double brute = v.dot(Eigen::Matrix2d::Identity() * v) / (2 * K * std::pow(std::sin(phase.zeta), 2));
        CHECK_THAT(tuned_readout_noise(o, m, phase, W).S_F / sql_force(m, W), WithinRel(brute, 1e-12));
        CHECK_THAT(brute, WithinRel(5.05, 1e-10));
    }

    // never below the SQL on a grid, equality where K = 1
    for (double W : log_grid(0.01 * g, 100 * g, 50))
        CHECK(tuned_readout_noise(o, m, phase, W).S_F >= sql_force(m, W) * (1 - 1e-12));

    MeasurementParams amp;
    amp.zeta = 0;
    CHECK_THROWS_AS(tuned_readout_noise(o, m, amp, g), DomainError);
}

TEST_CASE("variational readout cancels back action") {
    const double g = 2 * kPi * 100, M = 10;
    const OpticalParams o = tuned_cavity(g, M);
    const MechanicalParams m = MechanicalParams::free_mass(M);
    for (double W : {0.2 * g, g, 3 * g}) {
        const double K = kimble_factor(o, m, W).K;
        MeasurementParams meas;
        meas.zeta = variational_angle(K);
        const TunedNoise n = tuned_readout_noise(o, m, meas, W);
        CHECK_THAT(n.back_action_F, WithinAbs(0, 1e-12 * n.S_F));
        CHECK_THAT(n.S_F, WithinRel(n.shot_F, 1e-12));
        CHECK_THAT(n.S_F / n.sql_F, WithinRel(1 / (2 * K), 1e-10));
    }
}

TEST_CASE("linear-measurement spectra obey the Heisenberg bound") {
    const double g = 2 * kPi * 100, M = 10;
    const OpticalParams o = tuned_cavity(g, M);
    const MechanicalParams m = MechanicalParams::free_mass(M);
    for (double zeta : {0.3, 1.0, kPi / 2, 2.5})
        for (double q : {0.0, 0.8})
            for (double loss : {0.0, 0.1}) {
                MeasurementParams meas;
                meas.zeta = zeta;
                meas.q = q;
                meas.phi = 0.4;
                meas.loss = loss;
                for (double W : {0.1 * g, g, 10 * g}) {
                    const LinearSpectra s = tuned_linear_spectra(o, m, meas, W);
                    const double lhs = s.S_ZZ * s.S_FF - s.S_ZF * s.S_ZF;
                    CHECK(lhs >= kHbar * kHbar * (1 - 1e-9));
                }
            }
}

TEST_CASE("power scaling leaves the SQL unchanged") {
    const double g = 2 * kPi * 100, M = 10;
    const OpticalParams o = tuned_cavity(g, M);
    OpticalParams o4 = o;
    o4.I_c *= 4;
    const MechanicalParams m = MechanicalParams::free_mass(M);
    MeasurementParams phase;
    for (double W : {0.1 * g, g, 10 * g}) {
        CHECK_THAT(kimble_factor(o4, m, W).K, WithinRel(4 * kimble_factor(o, m, W).K, 1e-12));
        CHECK(tuned_readout_noise(o4, m, phase, W).sql_F == tuned_readout_noise(o, m, phase, W).sql_F);
    }
}

TEST_CASE("loss-limited back-action evasion") {
    CHECK_THAT(bae_loss_limit(std::log(std::sqrt(10.0)), 0.01), WithinRel(std::pow(0.001, 0.25), 1e-12));
    CHECK_THAT(bae_loss_limit(0, 1), WithinRel(1.0, 1e-15));
    CHECK(bae_loss_limit(50, 0.01) < 1e-10);
    CHECK(bae_loss_limit(1, 0) == 0);
}

TEST_CASE("detuned cavity effective parameters") {
    const double g = 2 * kPi * 1e4, M = 1e-3;
    OpticalParams o;
    o.gamma = g;
    o.L = 0.1;
    o.I_c = 10;
    const MechanicalParams m{M, 2 * kPi * 100, 0, 0};
    o.Delta = 0;
    CHECK_THAT(detuned_io(o, m, 10).omega_opt(), WithinRel(m.omega_m, 1e-14));
    o.Delta = -0.5 * g;
    CHECK(detuned_io(o, m, 10).omega_opt2 > m.omega_m * m.omega_m);
    o.Delta = 0.5 * g;
    CHECK(detuned_io(o, m, 10).omega_opt2 < m.omega_m * m.omega_m);

    // Omega_q^2 = 2 Theta^3 gamma/(gamma^2 + Delta^2), alpha^2 = M Omega_q^2/hbar
    const DetunedIO io = detuned_io(o, m, 10);
    const double th3 = 4 * o.omega0 * o.I_c / (M * o.L * kLightSpeed);
    CHECK_THAT(io.Omega_q * io.Omega_q, WithinRel(2 * th3 * g / (g * g + o.Delta * o.Delta), 1e-12));
    CHECK_THAT(io.alpha * io.alpha, WithinRel(M * io.Omega_q * io.Omega_q / kHbar, 1e-12));

    // spring cancels the mechanical restoring force: free mass, SQL touch at Omega_q
    MechanicalParams tuned_out = m;
    tuned_out.omega_m = std::sqrt(th3 * o.Delta / (g * g + o.Delta * o.Delta));
    const DetunedIO f = detuned_io(o, tuned_out, 1.0);
    REQUIRE_THAT(f.omega_opt2, WithinAbs(0, 1e-9 * tuned_out.omega_m * tuned_out.omega_m));
    const DetunedIO at = detuned_io(o, tuned_out, f.Omega_q);
    CHECK_THAT(at.K, WithinRel(1.0, 1e-8));

    OpticalParams bad = o;
    bad.gamma = 0;
    CHECK_THROWS_AS(detuned_io(bad, m, 1), DomainError);
}

TEST_CASE("optical spring") {
    const double g = 2 * kPi * 1e5, M = 1e-3;
    const MechanicalParams m{M, 2 * kPi * 10, 0, 0};
    OpticalParams o;
    o.gamma = g;
    o.L = 0.1;
    o.I_c = 100;
    o.Delta = 0;
    CHECK(std::abs(optical_spring(o, m, 100).K) == 0);

    for (double d : {-2.0, -0.5, 0.5, 2.0}) {
        o.Delta = d * g;
        const OpticalSpring s = optical_spring(o, m, 0);
        CHECK((s.K0 > 0) == (d < 0));
        CHECK((s.K1 > 0) == (d < 0));
        // low-frequency expansion against the exact rigidity
        const double W = 1e-3 * std::sqrt(o.Delta * o.Delta + g * g);
        const cplx exact = optical_spring(o, m, W).K;
        const cplx approx(s.K0, W * s.K1);
        CHECK(std::abs(exact - approx) / std::abs(exact) < 1e-5);
    }

    o.Delta = -0.5 * g;
    const OpticalSpring s = optical_spring(o, m, 0);
    const ShiftedOscillator sh = spring_shift(m, s);
    CHECK_THAT(sh.omega2, WithinRel(m.omega_m * m.omega_m + s.K0 / M, 1e-14));
    CHECK_THAT(sh.gamma_m, WithinRel(-s.K1 / (2 * M), 1e-14));
}

TEST_CASE("double optical spring stability") {
    const double g = 2 * kPi * 1e4, M = 1e-3;
    const MechanicalParams free = MechanicalParams::free_mass(M);
    auto spring = [&](double theta3, double Delta) {
        OpticalParams o;
        o.gamma = g;
        o.L = 0.1;
        o.Delta = Delta;
        o.I_c = theta3 * M * o.L * kLightSpeed / (4 * o.omega0);
        return optical_spring(o, free, 0);
    };
    const OpticalSpring zero = spring(0, 0.3 * g);
    const MechanicalParams damped{M, 100, 1, 0};
    CHECK(double_spring_stability(damped, zero, zero).stable);

    const OpticalSpring A = spring(g * g * g, -1.5 * g);   // restoring, anti-damping
    const OpticalSpring B = spring(3 * g * g * g, 0.1 * g); // anti-restoring, damping
    REQUIRE(A.K0 > 0);
    REQUIRE(A.K1 > 0);
    REQUIRE(B.K0 < 0);
    REQUIRE(B.K1 < 0);
    CHECK_FALSE(double_spring_stability(free, A, zero).stable);
    CHECK_FALSE(double_spring_stability(free, B, zero).stable);
    const StabilityVerdict v = double_spring_stability(free, A, B);
    CHECK(v.stable);
    // oracle: roots of M s^2 - K1 s + K0 by the quadratic formula
    const double K0 = A.K0 + B.K0, K1 = A.K1 + B.K1;
    const cplx disc = std::sqrt(cplx(K1 * K1 - 4 * M * K0, 0));
    for (const cplx& r : {(K1 + disc) / (2 * M), (K1 - disc) / (2 * M)}) CHECK(r.real() < 0);
    REQUIRE(v.roots.size() == 2);
    for (const cplx& r : v.roots) CHECK(r.real() < 0);
}

TEST_CASE("classical noise budget") {
    const MechanicalParams m = MechanicalParams::free_mass(1e-3);
    MeasurementParams meas;
    meas.Omega_F = 2 * kPi * 10;
    meas.Omega_q = 2 * kPi * 100;
    SECTION("classical noise touching the SQL") {
        meas.Omega_x = 2 * meas.Omega_F;
        const NoiseBudget b = classical_noise_budget(m, meas, log_grid(1, 1e5, 50));
        CHECK_THAT(b.beat_factor_analytic, WithinRel(1.0, 1e-14));
        CHECK_THAT(b.beat_factor_numeric, WithinRel(1.0, 1e-8));
    }
    SECTION("SQL beating factor of five") {
        meas.Omega_x = 50 * meas.Omega_F;
        const NoiseBudget b = classical_noise_budget(m, meas, log_grid(1, 1e5, 50));
        CHECK_THAT(b.beat_factor_numeric, WithinRel(0.04, 1e-8));
        CHECK_THAT(1 / std::sqrt(b.beat_factor_numeric), WithinRel(5.0, 1e-8));
        CHECK_THAT(b.beat_frequency_numeric, WithinRel(std::sqrt(meas.Omega_F * meas.Omega_x), 1e-4));
        for (std::size_t i = 0; i < b.total.S.size(); ++i) {
            const double sum = b.shot.S[i] + b.back_action.S[i] + b.force_classical.S[i] + b.sensing_classical.S[i];
            CHECK_THAT(b.total.S[i], WithinRel(sum, 1e-14));
            for (const SpectrumCurve* c : {&b.shot, &b.back_action, &b.force_classical, &b.sensing_classical})
                CHECK(b.total.S[i] >= c->S[i]);
        }
    }
    SECTION("no force noise") {
        meas.Omega_F = 0;
        meas.Omega_x = 2 * kPi * 1e3;
        const NoiseBudget b = classical_noise_budget(m, meas, log_grid(1, 1e5, 20));
        CHECK(b.beat_factor_analytic == 0);
    }
    CHECK_THROWS_AS(classical_noise_budget(m, meas, {}), DomainError);
}

TEST_CASE("sideband asymmetry") {
    const double SZ = 2.0, a = 3.0, Imchi = 1e30;
    const double Sx = 2 * kHbar * Imchi;  // zero-point oscillator
    const Sidebands s = sideband_asymmetry(SZ, a, Sx, Imchi);
    CHECK_THAT(s.S_minus, WithinRel(SZ, 1e-12));
    CHECK_THAT(s.S_plus, WithinRel(SZ + 2 * a * a * Sx, 1e-12));
    CHECK_THAT(asymmetry_occupation(1, 2), WithinRel(1.0, 1e-15));
    const double n = asymmetry_occupation(1, 1.1);
    CHECK_THAT(1 / n, WithinRel(1.1 / 1 - 1, 1e-12));
    CHECK_THAT(n, WithinRel(10.0, 1e-12));
    CHECK_THROWS_AS(asymmetry_occupation(1, 1), DomainError);
}

TEST_CASE("ponderomotive squeezing requirements") {
    const PonderoSqueeze p0 = pondero_squeeze_requirements(0);
    CHECK(p0.omega_opt_over_Omega_q == 1);
    CHECK(p0.Omega_F_bound_over_omega_opt == 1);
    const double q3 = std::log(2.0) / 2;  // 3 dB
    const PonderoSqueeze p3 = pondero_squeeze_requirements(q3);
    CHECK(p3.omega_opt_over_Omega_q < 1);
    CHECK(p3.Omega_F_bound_over_omega_opt < 1);
    CHECK(pondero_output_spectrum(-0.01, 2.0) < 1);
    CHECK(pondero_output_spectrum(0.01, 2.0) > 1);
}
