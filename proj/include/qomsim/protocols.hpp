#pragma once

#include <Eigen/Eigenvalues>

#include "optimize.hpp"
#include "verification.hpp"

namespace qomsim {

// Two-oscillator teleportation in units hbar = M = 1.
struct TeleportParams {
    double omega_opt = 0;
    double Omega_q = 0;
    double eps_fb = 0;   // feedback gain
    double q = 0;
    double Omega_F = 0;
    double Omega_x = std::numeric_limits<double>::infinity();
};

struct Sloshing {
    double Omega_plus = 0, Omega_minus = 0, Omega_slosh = 0;
    double tau_ex = std::numeric_limits<double>::infinity();
};

inline Sloshing teleport_sloshing(const TeleportParams& p) {
    require(p.omega_opt > 0 && p.Omega_q > 0, "omega_opt and Omega_q must be positive");
    require(p.eps_fb >= 0, "feedback gain must be nonnegative");
    const double w2 = p.omega_opt * p.omega_opt, k = p.eps_fb * p.Omega_q;
    if (!(w2 > k))
        throw DomainError("unstable normal mode: need omega_opt^2 > eps_fb*Omega_q (" + std::to_string(w2) +
                          " <= " + std::to_string(k) + ")");
    Sloshing s;
    s.Omega_plus = std::sqrt(w2 + k);
    s.Omega_minus = std::sqrt(w2 - k);
    s.Omega_slosh = s.Omega_plus - s.Omega_minus;
    if (s.Omega_slosh > 0) s.tau_ex = kPi / s.Omega_slosh;
    return s;
}

struct TeleportNoise {
    Sloshing modes;
    double zeta_x = 0, zeta_F = 0;
    double V_xx = 0, V_pp = 0;  // V_add is diagonal
    double det_ratio = 0;       // det/(1/4)
};

inline TeleportNoise teleport_added_noise(const TeleportParams& p) {
    require(p.Omega_x > 0 && p.Omega_F >= 0 && p.q >= 0, "invalid classical noise or squeezing");
    TeleportNoise r;
    r.modes = teleport_sloshing(p);
    const double e2q = std::exp(-2 * p.q);
    const double xix = p.Omega_q / p.Omega_x, xiF = p.Omega_F / p.Omega_q;
    r.zeta_x = std::sqrt(e2q + 2 * xix * xix);
    r.zeta_F = std::sqrt(e2q + 2 * xiF * xiF);
    if (r.modes.Omega_slosh == 0) {
        r.V_xx = r.V_pp = r.det_ratio = std::numeric_limits<double>::infinity();
        return r;
    }
    const double pre = kPi / 8 * (r.zeta_F * p.Omega_q * p.Omega_q + r.zeta_x * p.eps_fb * p.eps_fb) /
                       r.modes.Omega_slosh;
    const double Wp = r.modes.Omega_plus, Wm = r.modes.Omega_minus;
    r.V_xx = pre * (1 / (Wp * Wp) + 1 / (Wm * Wm));
    r.V_pp = pre * 2;
    r.det_ratio = r.V_xx * r.V_pp / 0.25;
    return r;
}

// Large-omega_opt optimum: pi^2 (e^{-2q} + 2 Omega_F/Omega_x).
inline double teleport_asymptotic_det(double q, double Omega_F, double Omega_x) {
    require(Omega_x > 0 && Omega_F >= 0, "invalid classical noise corners");
    return kPi * kPi * (std::exp(-2 * q) + 2 * Omega_F / Omega_x);
}

struct TeleportOptimum {
    TeleportParams best;
    double det_ratio = 0;
    double asymptote = 0;
    double relative_gap = 0;  // det/asymptote - 1
    int iterations = 0;
};

// Nelder-Mead over (log Omega_q, log eps_fb) at fixed omega_opt.
inline TeleportOptimum optimize_teleport(double omega_opt, double q, double Omega_F, double Omega_x) {
    require(omega_opt > 0 && Omega_F > 0 && Omega_x > 0, "optimizer needs positive omega_opt and noise corners");
    TeleportParams base{omega_opt, 0, 0, q, Omega_F, Omega_x};
    auto eval = [&](const std::vector<double>& v) {
        TeleportParams p = base;
        p.Omega_q = std::exp(v[0]);
        p.eps_fb = std::exp(v[1]);
        if (p.eps_fb * p.Omega_q >= omega_opt * omega_opt) return 1e300;
        return teleport_added_noise(p).det_ratio;
    };
    const double s0 = std::log(std::sqrt(Omega_x * Omega_F));
    const MinimizeResult mr = nelder_mead(eval, {s0, s0}, {0.5, 0.5}, 1e-9, 4000);
    TeleportOptimum o;
    o.best = base;
    o.best.Omega_q = std::exp(mr.x[0]);
    o.best.eps_fb = std::exp(mr.x[1]);
    o.det_ratio = mr.f;
    o.asymptote = teleport_asymptotic_det(q, Omega_F, Omega_x);
    o.relative_gap = o.det_ratio / o.asymptote - 1;
    o.iterations = mr.iterations;
    return o;
}

// Eigenvalues of the coupled first-order system (x1, p1, x2, p2), coupling k = eps_fb*Omega_q.
inline std::vector<cplx> teleport_mode_eigenvalues(double omega_opt, double k) {
    Eigen::Matrix4d A;
    const double w2 = omega_opt * omega_opt;
    A << 0, 1, 0, 0,
         -w2, 0, -k, 0,
         0, 0, 0, 1,
         -k, 0, -w2, 0;
    Eigen::EigenSolver<Eigen::Matrix4d> es(A, false);
    std::vector<cplx> ev;
    for (int i = 0; i < 4; ++i) ev.push_back(es.eigenvalues()[i]);
    return ev;
}

inline double teleport_growth_rate(double omega_opt, double k) {
    double g = -std::numeric_limits<double>::infinity();
    for (const cplx& e : teleport_mode_eigenvalues(omega_opt, k)) g = std::max(g, e.real());
    return g;
}

struct EntanglementWindow {
    double Omega_q = 0;
    double survival_time = 0;      // 1/Omega_q
    double N_eff_conditional = 0;  // common/differential mode, free-mass regime
    double tomography_D = 0;
    bool feasible = false;
};

// Omega_q = 0 selects sqrt(Omega_x Omega_F).
inline EntanglementWindow entanglement_window(double Omega_F, double ratio, double q, double Omega_q = 0,
                                              double hbar = kHbar) {
    require(Omega_F > 0, "Omega_F must be positive");
    require(ratio >= 1, "Omega_x/Omega_F must be at least 1");
    require(q >= 0, "squeeze factor must be nonnegative");
    const double Omega_x = ratio * Omega_F;
    EntanglementWindow w;
    w.Omega_q = Omega_q > 0 ? Omega_q : std::sqrt(Omega_x * Omega_F);
    w.survival_time = 1 / w.Omega_q;
    const MechanicalParams fm = MechanicalParams::free_mass(1.0);
    MeasurementParams meas;
    meas.Omega_q = w.Omega_q;
    meas.Omega_F = Omega_F;
    meas.Omega_x = Omega_x;
    meas.q = q;
    w.N_eff_conditional = conditional_covariance_with_noise(fm, meas, hbar).fom.N_eff;
    w.tomography_D = tomography_error(fm, meas, hbar).D;
    w.feasible = w.N_eff_conditional < 0.5 && w.tomography_D < 1;
    return w;
}

enum class CouplingVerdict { strong, marginal, weak };

inline const char* verdict_name(CouplingVerdict v) {
    switch (v) {
        case CouplingVerdict::strong: return "strong";
        case CouplingVerdict::marginal: return "marginal";
        case CouplingVerdict::weak: return "weak";
    }
    return "?";
}

struct StrongCoupling {
    double r = 0;           // (lambda/F) / sqrt(hbar/(M omega_m))
    double r_momentum = 0;  // (F hbar omega0/c) / sqrt(hbar M omega_m), equals 2 pi / r
    CouplingVerdict verdict = CouplingVerdict::weak;
};

// Verdict band: marginal within a factor 2 of r = 1.
inline StrongCoupling strong_coupling_ratio(const MechanicalParams& m, double wavelength, double finesse,
                                            double hbar = kHbar) {
    require(finesse > 0, "finesse must be positive");
    require(wavelength > 0, "wavelength must be positive");
    require(m.M > 0 && m.omega_m > 0, "mass and omega_m must be positive");
    StrongCoupling s;
    s.r = (wavelength / finesse) / std::sqrt(hbar / (m.M * m.omega_m));
    const double omega0 = 2 * kPi * kLightSpeed / wavelength;
    s.r_momentum = finesse * hbar * omega0 / kLightSpeed / std::sqrt(hbar * m.M * m.omega_m);
    s.verdict = s.r < 0.5 ? CouplingVerdict::strong : (s.r <= 2 ? CouplingVerdict::marginal : CouplingVerdict::weak);
    return s;
}

}  // namespace qomsim
