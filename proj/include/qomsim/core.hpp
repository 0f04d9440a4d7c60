#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace qomsim {

inline constexpr double kHbar = 1.054571817e-34;
inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kLightSpeed = 299792458.0;
inline constexpr double kNewtonG = 6.67430e-11;
inline constexpr double kPi = std::numbers::pi;

// Bad input: maps to CLI exit code 2.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A computation that ran but violated an invariant: exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

struct MechanicalParams {
    double M = 1.0;        // kg
    double omega_m = 0.0;  // rad/s
    double gamma_m = 0.0;  // rad/s
    double T_m = 0.0;      // K

    double Q() const {
        return gamma_m > 0 ? omega_m / (2.0 * gamma_m) : std::numeric_limits<double>::infinity();
    }

    void validate() const {
        require(M > 0, "mass M must be positive");
        require(omega_m >= 0, "omega_m must be nonnegative");
        require(gamma_m >= 0, "gamma_m must be nonnegative");
        require(T_m >= 0, "T_m must be nonnegative");
    }

    static MechanicalParams free_mass(double M) { return {M, 0.0, 0.0, 0.0}; }
};

struct OpticalParams {
    double omega0 = 2 * kPi * kLightSpeed / 1064e-9;  // carrier, rad/s
    double Delta = 0.0;                               // detuning, rad/s
    double gamma = 1.0;                               // half-bandwidth, rad/s
    double L = 1.0;                                   // m
    double I_c = 0.0;                                 // W

    void validate() const {
        require(gamma > 0, "cavity half-bandwidth gamma must be positive");
        require(L > 0, "cavity length L must be positive");
        require(I_c >= 0, "circulating power I_c must be nonnegative");
        require(omega0 > 0, "carrier frequency omega0 must be positive");
    }

    double g() const { return omega0 / L; }
    // Intracavity amplitude squared from stored energy 2 I_c L / c = hbar omega0 A^2.
    double A2() const { return 2.0 * I_c * L / (kLightSpeed * kHbar * omega0); }
    double G() const { return std::sqrt(A2()) * g(); }
    double theta3(double M) const { return 2.0 * kHbar * G() * G() / M; }
    double theta3_direct(double M) const { return 4.0 * omega0 * I_c / (M * L * kLightSpeed); }
    double theta(double M) const { return std::cbrt(theta3(M)); }

    // Power that yields a given Theta for mass M.
    static double power_for_theta(double theta, double M, double L, double omega0) {
        return theta * theta * theta * M * L * kLightSpeed / (4.0 * omega0);
    }
};

struct MeasurementParams {
    double Omega_q = 0.0;  // rad/s
    double zeta = kPi / 2; // homodyne angle
    double Omega_F = 0.0;  // classical force-noise corner
    double Omega_x = std::numeric_limits<double>::infinity();  // classical sensing-noise corner
    double q = 0.0;        // squeeze factor (amplitude e^-q)
    double phi = 0.0;      // squeeze angle
    double loss = 0.0;     // optical loss fraction

    void validate() const {
        require(Omega_q >= 0, "Omega_q must be nonnegative");
        require(loss >= 0 && loss <= 1, "optical loss must lie in [0,1]");
        require(q >= 0, "squeeze factor q must be nonnegative");
        require(Omega_F >= 0, "Omega_F must be nonnegative");
        require(Omega_x > 0, "Omega_x must be positive");
    }

    double xi_F() const { return Omega_F / Omega_q; }
    double xi_x() const { return Omega_q / Omega_x; }
    double alpha2(double M, double hbar = kHbar) const { return M * Omega_q * Omega_q / hbar; }
    // Single-sided classical spectra.
    double S_nF(double M) const { return 2.0 * kHbar * M * Omega_F * Omega_F; }
    double S_nx(double M) const { return 2.0 * kHbar / (M * Omega_x * Omega_x); }
};

enum class Units { displacement, force, strain, quadrature };

inline const char* units_name(Units u) {
    switch (u) {
        case Units::displacement: return "m^2/Hz";
        case Units::force: return "N^2/Hz";
        case Units::strain: return "1/Hz";
        case Units::quadrature: return "vacuum=1";
    }
    return "?";
}

struct SpectrumCurve {
    std::vector<double> omega;
    std::vector<double> S;
    Units units = Units::displacement;

    void validate(bool auto_spectrum = true) const {
        require(omega.size() == S.size(), "spectrum grid and values differ in length");
        for (std::size_t i = 1; i < omega.size(); ++i)
            require(omega[i] > omega[i - 1], "frequency grid must be strictly increasing");
        if (auto_spectrum)
            for (double s : S) require(s >= 0, "auto-spectrum must be nonnegative");
    }
};

struct Covariance {
    double xx = 0, xp = 0, pp = 0;
    double det() const { return xx * pp - xp * xp; }
};

struct GaussianState {
    double mean_x = 0, mean_p = 0;
    Covariance V;

    bool is_physical(double hbar = kHbar, double tol = 1e-9) const {
        return V.xx >= 0 && V.pp >= 0 && V.det() >= hbar * hbar / 4 * (1 - tol);
    }

    static GaussianState ground(const MechanicalParams& m, double hbar = kHbar) {
        require(m.omega_m > 0, "ground state needs omega_m > 0");
        return {0, 0, {hbar / (2 * m.M * m.omega_m), 0, hbar * m.M * m.omega_m / 2}};
    }
};

// Counter-based normal deviates: value depends only on (seed, trajectory, step, lane).
namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
inline double to_unit(std::uint64_t u) {  // (0,1)
    return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}
}  // namespace detail

struct WienerSource {
    std::uint64_t seed = 0;
    double dt = 1.0;
    int level = 0;  // each increment sums 2^level finer draws, so dt and dt/2 share a path

    double normal(std::uint64_t traj, std::uint64_t index, std::uint32_t lane = 0) const {
        std::uint64_t k = detail::mix64(seed ^ detail::mix64(traj * 0x632be59bd9b4e019ULL + lane));
        k = detail::mix64(k ^ (index * 0xd1b54a32d192ed03ULL));
        double u1 = detail::to_unit(k);
        double u2 = detail::to_unit(detail::mix64(k ^ 0xa0761d6478bd642fULL));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * kPi * u2);
    }

    double increment(std::uint64_t traj, std::uint64_t step, std::uint32_t lane = 0) const {
        const std::uint64_t n = std::uint64_t{1} << level;
        const double sub = dt / static_cast<double>(n);
        double w = 0;
        for (std::uint64_t j = 0; j < n; ++j) w += normal(traj, step * n + j, lane);
        return w * std::sqrt(sub);
    }

    WienerSource coarser() const { return {seed, dt * 2, level + 1}; }
};

struct QuadratureSpectra {
    double S_a1 = 1, S_a2 = 1, S_a1a2 = 0;
    double det() const { return S_a1 * S_a2 - S_a1a2 * S_a1a2; }
};

inline QuadratureSpectra vacuum_quadrature_spectra() { return {1, 1, 0}; }

inline QuadratureSpectra squeezed_quadrature_spectra(double q, double phi, double loss) {
    require(loss >= 0 && loss <= 1, "loss must lie in [0,1]");
    require(q >= 0, "squeeze factor must be nonnegative");
    const double c = std::cos(phi), s = std::sin(phi);
    const double d1 = std::exp(2 * q), d2 = std::exp(-2 * q);
    // R diag(d1,d2) R^T with R = [[c,-s],[s,c]]
    const double s11 = c * c * d1 + s * s * d2;
    const double s22 = s * s * d1 + c * c * d2;
    const double s12 = c * s * (d1 - d2);
    return {(1 - loss) * s11 + loss, (1 - loss) * s22 + loss, (1 - loss) * s12};
}

inline double thermal_occupation(double omega, double T) {
    if (T == 0) return 0.0;
    return 1.0 / std::expm1(kHbar * omega / (kBoltzmann * T));
}

inline double fdt_force_spectrum(const MechanicalParams& m, double gamma_j, double T_j,
                                 bool classical_limit = false) {
    require(gamma_j >= 0 && T_j >= 0, "bath damping and temperature must be nonnegative");
    if (classical_limit) return 8 * m.M * gamma_j * kBoltzmann * T_j;
    if (T_j == 0) return 4 * m.M * gamma_j * kHbar * m.omega_m;
    require(m.omega_m > 0, "FDT spectrum at omega_m = 0 needs the classical-limit flag");
    const double x = kHbar * m.omega_m / (2 * kBoltzmann * T_j);
    return 4 * m.M * gamma_j * kHbar * m.omega_m / std::tanh(x);
}

// Logarithmic grid with a fixed number of points per decade, both ends included.
inline std::vector<double> log_grid(double lo, double hi, int per_decade = 200) {
    require(lo > 0 && hi > lo, "log grid needs 0 < min < max");
    require(per_decade > 0, "points per decade must be positive");
    const double decades = std::log10(hi / lo);
    const int n = std::max(2, static_cast<int>(std::ceil(decades * per_decade)) + 1);
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    return g;
}

inline std::vector<double> linear_grid(double lo, double hi, int n) {
    require(n >= 2 && hi > lo, "linear grid needs n >= 2 and max > min");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    return g;
}

}  // namespace qomsim
