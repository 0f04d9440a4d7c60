#pragma once

#include <boost/math/tools/minima.hpp>

#include "conditional.hpp"

namespace qomsim {

struct ControlledState {
    double V_xx = 0, V_pp = 0;  // V_xp vanishes under the controller
    double lambda = 0;          // controller gain, kg/s (mass times the decay rate)
    double U = 1;
    double N_eff = 0;           // U/2 - 1/2
    double N_eff_literal = 0;   // (2/hbar)[sqrt(V_xx V_pp) + V_xp] of the conditional state
};

// Controlled steady state for a given gain lambda > 0.
inline ControlledState controlled_state(const Covariance& cond, double lambda, double hbar = kHbar) {
    require(cond.xx > 0, "conditional V_xx must be positive");
    require(lambda > 0, "controller rate must be positive");
    require(cond.pp >= 0 && cond.det() >= -1e-12 * cond.xx * cond.pp, "conditional covariance must be physical");
    // position records leave V_xp >= 0; the controller formula assumes it
    require(cond.xp >= -1e-12 * std::sqrt(cond.xx * cond.pp), "controller needs V_xp >= 0");
    ControlledState c;
    c.lambda = lambda;
    c.V_xx = cond.xx + cond.xp / lambda;
    c.V_pp = cond.pp + lambda * cond.xp;
    c.U = 2 / hbar * std::sqrt(std::max(0.0, c.V_xx * c.V_pp));
    c.N_eff = c.U / 2 - 0.5;
    c.N_eff_literal = 2 / hbar * (std::sqrt(cond.xx * cond.pp) + cond.xp);
    return c;
}

inline ControlledState optimal_controlled_state(const Covariance& cond, double hbar = kHbar) {
    require(cond.xx > 0, "conditional V_xx must be positive");
    require(cond.pp > 0, "conditional V_pp must be positive");
    return controlled_state(cond, std::sqrt(cond.pp / cond.xx), hbar);
}

// Quadrature variance V_tt = c^2 V_xx + 2cs V_xp + s^2 V_pp.
inline double quadrature_variance(const Covariance& V, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return c * c * V.xx + 2 * c * s * V.xp + s * s * V.pp;
}

inline double critical_temperature(const MechanicalParams& m, double hbar = kHbar) {
    require(m.omega_m > 0, "critical temperature needs omega_m > 0");
    require(m.gamma_m > 0, "critical temperature needs a finite Q");
    return hbar * m.omega_m * m.Q() / (2 * std::sqrt(2.0) * kBoltzmann);
}

// Two-sided thermal force level 4 M gamma_m k_B T (single-sided 8 M gamma_m k_B T).
inline double thermal_force_level(const MechanicalParams& m) {
    return fdt_force_spectrum(m, m.gamma_m, m.T_m, true) / 2;
}

// Feedback-cooled occupation at a given measurement rate: Kalman filter on the
// oscillator with back action plus thermal force noise, then the optimal controller.
inline ControlledState feedback_cooling_state(const MechanicalParams& m, double Omega_q, double hbar = kHbar) {
    m.validate();
    require(Omega_q > 0, "Omega_q must be positive");
    RiccatiModel mdl = RiccatiModel::pure(m.M, m.omega_m, m.M * Omega_q * Omega_q / hbar, hbar);
    mdl.sF += thermal_force_level(m);
    return optimal_controlled_state(kalman_steady_state(mdl), hbar);
}

inline double feedback_cooling_occupation(const MechanicalParams& m, double Omega_q, double hbar = kHbar) {
    return feedback_cooling_state(m, Omega_q, hbar).N_eff;
}

struct FeedbackCooling {
    double T_c = 0;
    double T_ratio = 0;            // T_m / T_c
    double N_eff_scaling = 0;      // 2^{-3/4} sqrt(T_m/T_c), valid for T_m << T_c
    double N_eff_opt = 0;          // numerical optimum over Omega_q
    double Omega_q_opt = 0;        // +inf when the optimum runs off to strong measurement
    double N_eff_strong_limit = 1 / std::sqrt(2.0);
    bool plateau = false;          // optimum at Omega_q -> infinity
};

// Sweep log(Omega_q/omega_m) over [lo, hi] decades, then Brent refinement.
inline FeedbackCooling optimize_feedback_cooling(const MechanicalParams& m, double lo_decade = -3,
                                                 double hi_decade = 4, int per_decade = 20, double hbar = kHbar) {
    m.validate();
    FeedbackCooling r;
    r.T_c = critical_temperature(m, hbar);
    r.T_ratio = m.T_m / r.T_c;
    r.N_eff_scaling = std::pow(2.0, -0.75) * std::sqrt(r.T_ratio);
    auto f = [&](double lg) { return feedback_cooling_occupation(m, m.omega_m * std::pow(10.0, lg), hbar); };
    const int n = static_cast<int>((hi_decade - lo_decade) * per_decade) + 1;
    int best = 0;
    double fbest = std::numeric_limits<double>::infinity();
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) {
        vals[i] = f(lo_decade + (hi_decade - lo_decade) * i / (n - 1));
        if (vals[i] < fbest) {
            fbest = vals[i];
            best = i;
        }
    }
    const double step = (hi_decade - lo_decade) / (n - 1);
    if (best == n - 1) {
        r.plateau = true;
        r.Omega_q_opt = std::numeric_limits<double>::infinity();
        r.N_eff_opt = fbest;
        return r;
    }
    const double a = lo_decade + step * std::max(0, best - 1), b = lo_decade + step * std::min(n - 1, best + 1);
    const auto [x, fx] = boost::math::tools::brent_find_minima(f, a, b, 40);
    r.Omega_q_opt = m.omega_m * std::pow(10.0, x);
    r.N_eff_opt = fx;
    return r;
}

struct RadiationDamping {
    double gamma_opt = 0;  // rad/s
    double n_opt = 0;
    double validity = 0;   // gamma / Delta
};

inline RadiationDamping radiation_damping(const OpticalParams& o, const MechanicalParams& m, double hbar = kHbar) {
    o.validate();
    require(o.Delta != 0, "radiation-damping occupation is undefined at zero detuning");
    require(m.omega_m > 0, "radiation damping needs omega_m > 0");
    RadiationDamping r;
    const double G = o.G(), ratio2 = o.gamma * o.gamma / (4 * o.Delta * o.Delta);
    r.gamma_opt = hbar * G * G / (2 * m.M * o.gamma * m.omega_m) * (1 - ratio2);
    r.n_opt = ratio2;
    r.validity = o.gamma / std::abs(o.Delta);
    return r;
}

struct Bath {
    double gamma = 0;
    double n = 0;
};

inline double multi_bath_occupation(const std::vector<Bath>& baths) {
    double num = 0, den = 0;
    for (const Bath& b : baths) {
        require(b.gamma >= 0 && b.n >= 0, "bath damping and occupation must be nonnegative");
        num += b.gamma * b.n;
        den += b.gamma;
    }
    require(den > 0, "at least one bath needs positive damping");
    return num / den;
}

struct QfResult {
    double Qf_benchmark = 0;  // k_B T/(2 pi hbar): Q f above this gives n < 1 without dilution
    double Qf_required = 0;   // benchmark relaxed by the dilution factor squared
    double relaxation = 1;    // (omega_opt/omega_m)^2
    double n_bar = 0;         // (k_B T/hbar omega_m Q)(omega_m/omega_opt)^2
};

inline QfResult qf_criterion(const MechanicalParams& m, double dilution, double hbar = kHbar) {
    m.validate();
    require(dilution >= 1, "dilution omega_opt/omega_m must be at least 1");
    require(m.omega_m > 0, "qf criterion needs omega_m > 0");
    QfResult r;
    r.Qf_benchmark = kBoltzmann * m.T_m / (2 * kPi * hbar);
    r.relaxation = std::isinf(dilution) ? std::numeric_limits<double>::infinity() : dilution * dilution;
    r.Qf_required = r.Qf_benchmark / r.relaxation;
    const double Q = m.Q();
    r.n_bar = std::isinf(Q) ? 0.0 : kBoltzmann * m.T_m / (hbar * m.omega_m * Q) / r.relaxation;
    return r;
}

struct RecoveryResult {
    double n_damping = 0;      // passive (radiation damping) occupation
    double n_conditional = 0;  // conditional-state occupation with the record kept
    double n_feedback = 0;     // optimal controller on top of the conditional state
    double gamma_total = 0;
    double Omega_q = 0;
};

// Detuned-cavity cooling with and without feedback from the outgoing light.
// The cooled oscillator is a damped oscillator whose force noise reproduces the
// damping-weighted bath occupation; the record has white sensing noise set by Omega_q.
inline RecoveryResult feedback_recovery_gain(const MechanicalParams& m, double n_th, double gamma_opt, double n_opt,
                                             double Omega_q, double hbar = kHbar) {
    m.validate();
    require(m.omega_m > 0, "needs omega_m > 0");
    require(n_th >= 0 && n_opt >= 0 && gamma_opt >= 0 && Omega_q >= 0, "inputs must be nonnegative");
    RecoveryResult r;
    r.gamma_total = m.gamma_m + gamma_opt;
    require(r.gamma_total > 0, "total damping must be positive");
    r.n_damping = multi_bath_occupation({{m.gamma_m, n_th}, {gamma_opt, n_opt}});
    r.Omega_q = Omega_q;
    RiccatiModel mdl;
    mdl.M = m.M;
    mdl.omega = m.omega_m;
    mdl.hbar = hbar;
    mdl.damping = r.gamma_total;
    // stationary V_pp = sF/(4 gamma) = hbar M omega (n + 1/2)
    mdl.sF = 4 * r.gamma_total * hbar * m.M * m.omega_m * (r.n_damping + 0.5);
    mdl.sZ = Omega_q > 0 ? hbar / (2 * m.M * Omega_q * Omega_q) : std::numeric_limits<double>::infinity();
    const Covariance cond = kalman_steady_state(mdl);
    r.n_conditional = fom_from_covariance(cond, hbar).N_eff;
    r.n_feedback = optimal_controlled_state(cond, hbar).N_eff;
    return r;
}

inline RecoveryResult feedback_recovery_gain(const OpticalParams& o, const MechanicalParams& m, double hbar = kHbar) {
    const RadiationDamping rd = radiation_damping(o, m, hbar);
    const DetunedIO io = detuned_io(o, m, m.omega_m);
    const double n_th = m.T_m > 0 ? thermal_occupation(m.omega_m, m.T_m) : 0.0;
    return feedback_recovery_gain(m, n_th, std::max(0.0, rd.gamma_opt), rd.n_opt, io.Omega_q, hbar);
}

}  // namespace qomsim
