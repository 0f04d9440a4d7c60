#pragma once

#include "core.hpp"

namespace qomsim {

inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg

struct MaterialParams {
    double rho0 = 0;    // bulk density, kg/m^3
    double m_atom = 0;  // kg
    double dx_zp = 0;   // zero-point spread of each atom along one axis, m

    void validate() const {
        require(rho0 > 0, "density must be positive");
        require(m_atom > 0, "atomic mass must be positive");
        require(dx_zp > 0, "zero-point spread must be positive");
    }

    // Mass concentration of the lattice relative to the bulk density.
    double Lambda() const { return m_atom / (12 * std::sqrt(kPi) * rho0 * dx_zp * dx_zp * dx_zp); }

    // Material with a prescribed concentration factor (solves for dx_zp).
    static MaterialParams from_concentration(double rho0, double m_atom, double Lambda) {
        require(Lambda > 0, "concentration factor must be positive");
        MaterialParams p{rho0, m_atom, 1.0};
        require(rho0 > 0 && m_atom > 0, "density and atomic mass must be positive");
        p.dx_zp = std::cbrt(m_atom / (12 * std::sqrt(kPi) * rho0 * Lambda));
        return p;
    }

    static MaterialParams silicon() {
        return from_concentration(2.3e3, 28.0855 * kAtomicMassUnit, 8.3e3);
    }
};

struct GravityDecoherence {
    double cycles = 0;          // Omega_q tau
    double threshold_rate = 0;  // Omega_q where the cycle count is one
    double threshold_time = 0;  // 1/threshold_rate, s
};

// Lambda = 1 gives the unconcentrated (uniform density) estimate.
inline GravityDecoherence gravity_decoherence_cycles(double Omega_q, double rho0, double Lambda = 1) {
    require(Omega_q > 0 && rho0 > 0 && Lambda > 0, "Omega_q, density and concentration must be positive");
    GravityDecoherence g;
    const double Grho = kNewtonG * rho0;
    g.cycles = Omega_q * Omega_q / (Lambda * Grho);
    g.threshold_rate = std::sqrt(Lambda * Grho);
    g.threshold_time = 1 / g.threshold_rate;
    return g;
}

// Self-gravity coupling C = G m M/(12 sqrt(pi) dx_zp^3); C/M = G Lambda rho0.
inline double sn_coupling(const MaterialParams& mat, double M) {
    mat.validate();
    require(M > 0, "mass must be positive");
    return kNewtonG * mat.m_atom * M / (12 * std::sqrt(kPi) * std::pow(mat.dx_zp, 3));
}

struct SNSplit {
    double omega_SN = 0;    // sqrt(G Lambda rho0)
    double omega_q = 0;     // sqrt(omega_c^2 + omega_SN^2)
    double Q_required = 0;  // omega_c^2/omega_SN^2: ring-down must resolve the split
    double Q_ratio_literal = 0;  // omega_SN^2/omega_c^2 as printed
    double split = 0;       // omega_q - omega_c
};

inline SNSplit sn_frequency_split(double omega_c, const MaterialParams& mat) {
    require(omega_c > 0, "trap frequency must be positive");
    mat.validate();
    SNSplit s;
    const double w2 = kNewtonG * mat.Lambda() * mat.rho0;
    s.omega_SN = std::sqrt(w2);
    s.omega_q = std::sqrt(omega_c * omega_c + w2);
    s.Q_required = omega_c * omega_c / w2;
    s.Q_ratio_literal = w2 / (omega_c * omega_c);
    s.split = s.omega_q - omega_c;
    return s;
}

// Variant with the coupling supplied directly (C = 0 means no split).
inline double sn_rotation_frequency(double omega_c, double C, double M) {
    require(omega_c > 0 && M > 0 && C >= 0, "invalid trap, mass or coupling");
    return std::sqrt(omega_c * omega_c + C / M);
}

}  // namespace qomsim
