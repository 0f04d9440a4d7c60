#include <catch_amalgamated.hpp>

#include "qomsim/protocols.hpp"

using namespace qomsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double kQ10 = std::log(10.0) / 2;  // e^{-2q} = 0.1
const double kOF = 1 / std::sqrt(50.0), kOx = std::sqrt(50.0);
}  // namespace

TEST_CASE("normal-mode sloshing") {
    TeleportParams p{1, 1, 0.5};
    const Sloshing s = teleport_sloshing(p);
    CHECK_THAT(s.Omega_plus, WithinRel(std::sqrt(1.5), 1e-15));
    CHECK_THAT(s.Omega_minus, WithinRel(std::sqrt(0.5), 1e-15));
    CHECK_THAT(s.tau_ex, WithinRel(kPi / (std::sqrt(1.5) - std::sqrt(0.5)), 1e-14));
    p.eps_fb = 0;
    CHECK(std::isinf(teleport_sloshing(p).tau_ex));
    CHECK(std::isinf(teleport_added_noise(p).det_ratio));
    p.eps_fb = 1;
    CHECK_THROWS_AS(teleport_sloshing(p), DomainError);
    p.eps_fb = 2;
    CHECK_THROWS_AS(teleport_added_noise(p), DomainError);
}

TEST_CASE("coupled-mode stability boundary") {
    const double w = 1.3;
    CHECK(teleport_growth_rate(w, 0.9 * w * w) < 1e-7);
    CHECK(teleport_growth_rate(w, 1.1 * w * w) > 0.1);
    // unstable growth rate is sqrt(k - w^2)
    CHECK_THAT(teleport_growth_rate(w, 2 * w * w), WithinRel(w, 1e-10));
    // stable frequencies are the sloshing pair
    std::vector<double> im;
    for (const cplx& e : teleport_mode_eigenvalues(w, 0.5)) im.push_back(std::abs(e.imag()));
    std::sort(im.begin(), im.end());
    CHECK_THAT(im.front(), WithinRel(std::sqrt(w * w - 0.5), 1e-10));
    CHECK_THAT(im.back(), WithinRel(std::sqrt(w * w + 0.5), 1e-10));
}

TEST_CASE("teleportation added noise") {
    SECTION("asymptote") {
        CHECK_THAT(teleport_asymptotic_det(kQ10, kOF, kOx), WithinRel(kPi * kPi * 0.14, 1e-14));
        CHECK_THAT(teleport_asymptotic_det(kQ10, kOF, kOx), WithinAbs(1.38, 0.005));
    }
    SECTION("noise is symmetric in the two back-action channels") {
        TeleportParams p{5, 2, 3, 0, 0.1, 10};
        const auto n = teleport_added_noise(p);
        CHECK_THAT(n.zeta_F, WithinRel(std::sqrt(1 + 2 * 0.05 * 0.05), 1e-14));
        CHECK_THAT(n.zeta_x, WithinRel(std::sqrt(1 + 2 * 0.2 * 0.2), 1e-14));
        CHECK_THAT(n.det_ratio, WithinRel(4 * n.V_xx * n.V_pp, 1e-14));
    }
    SECTION("optimizer approaches the asymptote from above") {
        const auto o = optimize_teleport(30, kQ10, kOF, kOx);
        CHECK_THAT(o.det_ratio, WithinRel(o.asymptote, 0.10));
        CHECK(o.det_ratio >= o.asymptote * (1 - 1e-6));
        CHECK(o.best.eps_fb * o.best.Omega_q < 900);
    }
    SECTION("optimum improves with the optical spring frequency") {
        double prev = 1e300;
        for (double w : {2.0, 5.0, 15.0, 40.0}) {
            const double d = optimize_teleport(w, kQ10, kOF, kOx).det_ratio;
            CHECK(d < prev);
            prev = d;
        }
    }
}

TEST_CASE("macroscopic entanglement window") {
    const auto good = entanglement_window(1e-2, 50, 0, 0, 1);
    CHECK(good.feasible);
    CHECK_THAT(good.Omega_q, WithinRel(std::sqrt(50.0) * 1e-2, 1e-14));
    CHECK_FALSE(entanglement_window(1e-2, 1, 0, 0, 1).feasible);
    // halving the force-noise corner at fixed ratio doubles the survival time
    const auto half = entanglement_window(5e-3, 50, 0, 0, 1);
    CHECK_THAT(half.survival_time, WithinRel(2 * good.survival_time, 1e-14));
    CHECK_THAT(half.N_eff_conditional, WithinRel(good.N_eff_conditional, 1e-9));
    CHECK_THROWS_AS(entanglement_window(1, 0.5, 0), DomainError);
}

TEST_CASE("single-photon strong coupling") {
    const double lam = 1064e-9;
    SECTION("a kilogram mirror is weakly coupled") {
        const MechanicalParams m{1, 2 * kPi, 0, 0};
        const auto s = strong_coupling_ratio(m, lam, 1e4);
        CHECK(s.verdict == CouplingVerdict::weak);
        CHECK(s.r > 1e6);
        CHECK_THAT(s.r * s.r_momentum, WithinRel(2 * kPi, 1e-12));
        CHECK(std::string(verdict_name(s.verdict)) == "weak");
    }
    SECTION("resolution equal to the zero-point spread is marginal") {
        const double F = 1e5, w = 2 * kPi * 1e5, x = lam / F;
        const MechanicalParams m{kHbar / (w * x * x), w, 0, 0};
        const auto s = strong_coupling_ratio(m, lam, F);
        CHECK_THAT(s.r, WithinRel(1.0, 1e-12));
        CHECK(s.verdict == CouplingVerdict::marginal);
        const MechanicalParams light{m.M / 100, w, 0, 0};
        CHECK(strong_coupling_ratio(light, lam, F).verdict == CouplingVerdict::strong);
    }
    CHECK_THROWS_AS(strong_coupling_ratio(MechanicalParams{1, 1, 0, 0}, lam, 0), DomainError);
}
