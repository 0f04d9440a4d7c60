#pragma once

#include <algorithm>
#include <complex>
#include <unsupported/Eigen/Polynomials>
#include <boost/math/tools/minima.hpp>

#include "core.hpp"

namespace qomsim {

using cplx = std::complex<double>;

// Standard quantum limits (single-sided).
inline double sql_force(const MechanicalParams& m, double Omega) {
    return 2 * kHbar * m.M * std::abs(Omega * Omega - m.omega_m * m.omega_m);
}

inline double sql_displacement(const MechanicalParams& m, double Omega) {
    const double d = std::abs(Omega * Omega - m.omega_m * m.omega_m);
    if (d == 0) return std::numeric_limits<double>::infinity();
    return 2 * kHbar / (m.M * d);
}

inline double sql_strain(const MechanicalParams& m, double Omega, double L) {
    return 2 * kHbar * std::abs(Omega * Omega - m.omega_m * m.omega_m) /
           (m.M * std::pow(Omega, 4) * L * L);
}

struct KimbleFactor {
    double Omega = 0;
    double K = 0;
    double beta = 0;
    cplx phase() const { return std::exp(cplx(0, 2 * beta)); }
};

inline KimbleFactor kimble_factor(const OpticalParams& o, const MechanicalParams& m, double Omega) {
    o.validate();
    require(o.Delta == 0, "Kimble factor is defined for a tuned cavity; use detuned_io");
    const double th3 = o.theta3(m.M);
    const double K = 2 * th3 * o.gamma /
                     ((Omega * Omega - m.omega_m * m.omega_m) * (Omega * Omega + o.gamma * o.gamma));
    return {Omega, K, -std::atan2(o.gamma, Omega)};
}

struct TunedNoise {
    double S_F = 0, S_x = 0;        // totals, force- and displacement-referred
    double shot_F = 0;              // a2 and loss contribution
    double back_action_F = 0;       // a1 contribution
    double cross_F = 0;             // a1-a2 correlation term (squeezing only)
    double sql_F = 0;
};

// Force-referred quantum noise of a tuned interferometer read at angle zeta,
// with squeezed input (q, phi) and lumped output loss.
inline TunedNoise tuned_readout_noise(const OpticalParams& o, const MechanicalParams& m,
                                      const MeasurementParams& meas, double Omega) {
    const double s = std::sin(meas.zeta), c = std::cos(meas.zeta);
    require(std::abs(s) > 1e-15, "homodyne angle with sin(zeta) = 0 carries no signal");
    require(meas.loss < 1, "loss = 1 leaves no signal");
    const KimbleFactor k = kimble_factor(o, m, Omega);
    const QuadratureSpectra C = squeezed_quadrature_spectra(meas.q, meas.phi, 0.0);
    const double v1 = c - k.K * s, v2 = s;
    const double eps = meas.loss;
    const double norm = 2 * std::abs(k.K) * s * s * (1 - eps);
    TunedNoise r;
    r.sql_F = sql_force(m, Omega);
    r.back_action_F = (1 - eps) * v1 * v1 * C.S_a1 / norm * r.sql_F;
    r.shot_F = ((1 - eps) * v2 * v2 * C.S_a2 + eps) / norm * r.sql_F;
    r.cross_F = (1 - eps) * 2 * v1 * v2 * C.S_a1a2 / norm * r.sql_F;
    r.S_F = r.back_action_F + r.shot_F + r.cross_F;
    const double chi_inv = m.M * (Omega * Omega - m.omega_m * m.omega_m);
    r.S_x = r.S_F / (chi_inv * chi_inv);
    return r;
}

// tan(zeta) = 1/K cancels the back-action term.
inline double variational_angle(double K) { return std::atan2(1.0, K); }

struct LinearSpectra {
    double S_ZZ = 0, S_FF = 0, S_ZF = 0;  // single-sided, S_ZF real here
};

// Sensing (displacement-referred) and back-action force spectra of the tuned readout.
inline LinearSpectra tuned_linear_spectra(const OpticalParams& o, const MechanicalParams& m,
                                          const MeasurementParams& meas, double Omega) {
    const double s = std::sin(meas.zeta), c = std::cos(meas.zeta);
    require(std::abs(s) > 1e-15, "homodyne angle with sin(zeta) = 0 carries no signal");
    const KimbleFactor k = kimble_factor(o, m, Omega);
    const double K = std::abs(k.K);
    const double sqlx = sql_displacement(m, Omega);
    const double s2 = 2 * K / sqlx;  // squared signal gain into the output quadrature
    const double chi = -1.0 / (m.M * (Omega * Omega - m.omega_m * m.omega_m));
    const QuadratureSpectra C = squeezed_quadrature_spectra(meas.q, meas.phi, meas.loss);
    // Z = (a1 c + a2 s)/(g s), F = -K a1 /(g chi) with g = sqrt(s2)
    const double zz = (c * c * C.S_a1 + 2 * c * s * C.S_a1a2 + s * s * C.S_a2) / (s2 * s * s);
    const double ff = K * K * C.S_a1 / (s2 * chi * chi);
    const double zf = -K * (c * C.S_a1 + s * C.S_a1a2) / (s2 * s * chi);
    return {zz, ff, zf};
}

inline double bae_loss_limit(double q, double loss) {
    require(loss >= 0 && loss <= 1, "loss must lie in [0,1]");
    require(q >= 0, "squeeze factor must be nonnegative");
    if (loss == 0) return 0.0;
    return std::pow(std::exp(-2 * q) * loss, 0.25);
}

struct DetunedIO {
    double omega_opt2 = 0;  // rad^2/s^2
    double Omega_q = 0;     // rad/s
    double alpha = 0;       // SI measurement strength, 1/(m sqrt(s))
    double validity = 0;    // |Omega| / sqrt(gamma^2 + Delta^2), should be << 1
    double K = 0;           // Omega_q^2 / (Omega^2 - omega_opt^2)
    double omega_opt() const { return std::sqrt(std::max(0.0, omega_opt2)); }
};

inline DetunedIO detuned_io(const OpticalParams& o, const MechanicalParams& m, double Omega) {
    o.validate();
    const double th3 = o.theta3(m.M);
    const double den = o.gamma * o.gamma + o.Delta * o.Delta;
    DetunedIO r;
    r.omega_opt2 = m.omega_m * m.omega_m - th3 * o.Delta / den;
    r.Omega_q = std::sqrt(2 * th3 * o.gamma / den);
    r.alpha = std::sqrt(m.M / kHbar) * r.Omega_q;
    r.validity = std::abs(Omega) / std::sqrt(den);
    r.K = r.Omega_q * r.Omega_q / (Omega * Omega - r.omega_opt2);
    return r;
}

struct OpticalSpring {
    double K0 = 0;  // N/m
    double K1 = 0;  // N s/m, K ~ K0 + i Omega K1
    cplx K;         // exact value at the evaluation frequency
};

inline OpticalSpring optical_spring(const OpticalParams& o, const MechanicalParams& m, double Omega) {
    o.validate();
    const double th3 = o.theta3(m.M);
    const double den = o.Delta * o.Delta + o.gamma * o.gamma;
    OpticalSpring s;
    s.K = -m.M * th3 * o.Delta / cplx(den - Omega * Omega, -2 * o.gamma * Omega);
    s.K0 = -m.M * th3 * o.Delta / den;
    s.K1 = -2 * m.M * th3 * o.Delta * o.gamma / (den * den);
    return s;
}

struct ShiftedOscillator {
    double omega2 = 0;
    double gamma_m = 0;
};

inline ShiftedOscillator spring_shift(const MechanicalParams& m, const OpticalSpring& s) {
    return {m.omega_m * m.omega_m + s.K0 / m.M, m.gamma_m - s.K1 / (2 * m.M)};
}

inline ShiftedOscillator spring_shift(const OpticalParams& o, const MechanicalParams& m) {
    return spring_shift(m, optical_spring(o, m, 0.0));
}

// Roots of a real polynomial given low-to-high coefficients.
inline std::vector<cplx> poly_roots(const std::vector<double>& coeffs) {
    std::vector<double> c = coeffs;
    while (c.size() > 1 && c.back() == 0) c.pop_back();
    if (c.size() <= 1) return {};
    Eigen::VectorXd v(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) v[i] = c[i];
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(v);
    std::vector<cplx> out;
    for (Eigen::Index i = 0; i < solver.roots().size(); ++i) out.push_back(solver.roots()[i]);
    return out;
}

struct StabilityVerdict {
    bool stable = false;
    double K0_total = 0, K1_total = 0;
    double stiffness = 0;   // M omega_m^2 + K0
    double damping = 0;     // gamma_m - K1/(2M)
    std::vector<cplx> roots;  // characteristic roots in s = -i Omega
};

inline StabilityVerdict double_spring_stability(const MechanicalParams& m, const OpticalSpring& a,
                                                const OpticalSpring& b) {
    StabilityVerdict v;
    v.K0_total = a.K0 + b.K0;
    v.K1_total = a.K1 + b.K1;
    v.stiffness = m.M * m.omega_m * m.omega_m + v.K0_total;
    v.damping = m.gamma_m - v.K1_total / (2 * m.M);
    v.stable = v.stiffness > 0 && v.damping > 0;
    // M s^2 + (2 M gamma_m - K1) s + (M omega_m^2 + K0) = 0
    v.roots = poly_roots({v.stiffness, 2 * m.M * v.damping, m.M});
    return v;
}

struct NoiseBudget {
    SpectrumCurve shot, back_action, force_classical, sensing_classical, total, sql;
    Units units = Units::displacement;
    double beat_factor_analytic = 0;   // min S_cl/S_SQL, closed form 2 Omega_F/Omega_x
    double beat_factor_numeric = 0;
    double beat_frequency_numeric = 0;
};

// Displacement-referred budget for a position meter of strength Omega_q.
inline NoiseBudget classical_noise_budget(const MechanicalParams& m, const MeasurementParams& meas,
                                          const std::vector<double>& grid) {
    require(!grid.empty(), "frequency grid is empty");
    require(meas.Omega_x > 0, "Omega_x must be positive");
    NoiseBudget b;
    for (SpectrumCurve* c : {&b.shot, &b.back_action, &b.force_classical, &b.sensing_classical,
                             &b.total, &b.sql}) {
        c->omega = grid;
        c->units = Units::displacement;
        c->S.resize(grid.size());
    }
    const double M = m.M, w2 = m.omega_m * m.omega_m, Oq2 = meas.Omega_q * meas.Omega_q;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double W = grid[i];
        const double chi2inv = M * M * (W * W - w2) * (W * W - w2);
        b.shot.S[i] = meas.Omega_q > 0 ? kHbar / (M * Oq2) : 0.0;
        b.back_action.S[i] = kHbar * M * Oq2 / chi2inv;
        b.force_classical.S[i] = meas.S_nF(M) / chi2inv;
        b.sensing_classical.S[i] = meas.S_nx(M);
        b.total.S[i] = b.shot.S[i] + b.back_action.S[i] + b.force_classical.S[i] +
                       b.sensing_classical.S[i];
        b.sql.S[i] = sql_displacement(m, W);
    }
    b.beat_factor_analytic = 2 * meas.Omega_F / meas.Omega_x;
    if (meas.Omega_F > 0 && std::isfinite(meas.Omega_x)) {
        auto ratio = [&](double logW) {
            const double W = std::exp(logW);
            const double cl = meas.S_nx(M) + meas.S_nF(M) / (M * M * std::pow(W * W - w2, 2));
            return cl / sql_displacement(m, W);
        };
        const double centre = 0.5 * std::log(meas.Omega_F * meas.Omega_x + w2);
        auto res = boost::math::tools::brent_find_minima(ratio, centre - 5.0, centre + 5.0, 52);
        b.beat_frequency_numeric = std::exp(res.first);
        b.beat_factor_numeric = res.second;
    }
    return b;
}

struct Sidebands {
    double S_minus = 0, S_plus = 0;
};

inline Sidebands sideband_asymmetry(double S_Z, double alpha, double S_x, double Im_chi) {
    const double a2 = alpha * alpha;
    return {S_Z + a2 * S_x - 2 * a2 * kHbar * Im_chi, S_Z + a2 * S_x + 2 * a2 * kHbar * Im_chi};
}

inline double asymmetry_occupation(double I_plus, double I_minus) {
    require(I_plus > 0 && I_minus > I_plus, "sideband areas need I_minus > I_plus > 0");
    return I_plus / (I_minus - I_plus);
}

struct PonderoSqueeze {
    double omega_opt_over_Omega_q = 1;
    double Omega_F_bound_over_omega_opt = 1;
};

inline PonderoSqueeze pondero_squeeze_requirements(double q_target) {
    require(q_target >= 0, "target squeezing must be nonnegative");
    return {std::exp(-q_target), std::exp(-2 * q_target)};
}

// Output quadrature spectrum near the amplitude quadrature, first order in zeta.
inline double pondero_output_spectrum(double zeta, double Omega_q_over_omega_opt) {
    return 1 + 2 * Omega_q_over_omega_opt * Omega_q_over_omega_opt * zeta;
}

}  // namespace qomsim
