#pragma once

#include <Eigen/Dense>

#include "conditional.hpp"
#include "optimize.hpp"

namespace qomsim {

struct TomographyError {
    double V_xx = 0, V_xp = 0, V_pp = 0;
    double D = 0;          // det(V_add)/(hbar^2/4) from the three covariances
    double D_closed = 0;   // (Omega_F/Omega_x)^2 + (e^{-2q}/2)(Omega_F/Omega_q)^2 as printed
    double Lambda_x = 0;
    bool sub_heisenberg = true;
    bool regime_ok = true;  // Omega_q >= 10 omega_m

    Covariance V() const { return {V_xx, V_xp, V_pp}; }
};

// Added-noise ellipse of back-action-evading tomography with classical noise.
inline TomographyError tomography_error(const MechanicalParams& m, const MeasurementParams& meas,
                                        double hbar = kHbar) {
    require(meas.Omega_q > 0, "Omega_q must be positive");
    require(meas.Omega_x > 0 && meas.Omega_F >= 0, "classical noise corners must be valid");
    const double xiF = meas.xi_F(), xix = meas.xi_x();
    const double L = std::sqrt(xix * xix + std::exp(-2 * meas.q) / 2);
    const double Oq = meas.Omega_q;
    TomographyError t;
    t.Lambda_x = L;
    t.V_xx = std::sqrt(2.0) * hbar / (m.M * Oq) * std::pow(L, 1.5) * std::sqrt(xiF);
    t.V_xp = -L * xiF * hbar;
    t.V_pp = std::sqrt(2.0) * hbar * m.M * Oq * std::sqrt(L) * std::pow(xiF, 1.5);
    t.D = (t.V_xx * t.V_pp - t.V_xp * t.V_xp) / (hbar * hbar / 4);
    const double rF = meas.Omega_F / meas.Omega_x, rq = meas.Omega_F / Oq;
    t.D_closed = rF * rF + std::exp(-2 * meas.q) / 2 * rq * rq;
    t.sub_heisenberg = t.D < 1;
    t.regime_ok = Oq >= 10 * m.omega_m;
    return t;
}

namespace detail {

// R[i] = integral of f from t_i to the last sample: Simpson pairs stepping back
// from the end, with a third-order single-interval start for the other parity.
inline std::vector<double> reverse_cumulative(const std::vector<double>& f, double dt) {
    const std::size_t N = f.size();
    std::vector<double> R(N, 0.0);
    if (N < 2) return R;
    if (N == 2) {
        R[0] = dt / 2 * (f[0] + f[1]);
        return R;
    }
    R[N - 2] = dt / 12 * (5 * f[N - 1] + 8 * f[N - 2] - f[N - 3]);
    for (std::size_t i = N - 1; i >= 2; --i)
        R[i - 2] = R[i] + dt / 3 * (f[i - 2] + 4 * f[i - 1] + f[i]);
    return R;
}

// Integral of g(t') k(t' - t_i) over [t_i, inf) for every grid point t_i:
// composite Simpson on the grid plus an exponential tail fitted to the last samples.
// O(N) via the angle-addition split of the kernel.
// k(s) = sin(w s)/w, or s for w = 0.
inline std::vector<double> response_integral(const std::vector<double>& g, double dt, double w) {
    const std::size_t N = g.size();
    require(N >= 4, "need at least 4 samples");
    require(dt > 0, "grid step must be positive");
    double gmax = 0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    std::vector<double> out(N, 0.0);
    if (gmax == 0) return out;

    // decay check on the last tenth of the grid
    const std::size_t tail0 = N - std::max<std::size_t>(2, N / 10);
    double tmax = 0;
    for (std::size_t i = tail0; i < N; ++i) tmax = std::max(tmax, std::abs(g[i]));
    if (tmax > 1e-3 * gmax) throw DomainError("g2 does not decay on the supplied grid");

    // tail rate from the envelope: peak of each half of the last tenth
    double Gam = 0;
    {
        const std::size_t mid = (tail0 + N) / 2;
        double a = 0, b = 0;
        for (std::size_t i = tail0; i < mid; ++i) a = std::max(a, std::abs(g[i]));
        for (std::size_t i = mid; i < N; ++i) b = std::max(b, std::abs(g[i]));
        if (a > 0 && b > 0 && b < a) Gam = std::log(a / b) / ((mid - tail0) * dt);
    }
    const double T = (N - 1) * dt, gT = g[N - 1];

    // k(t'-t) splits into products, so every I(t_i) follows from reverse
    // cumulative integrals of g(t') cos(w t'), g(t') sin(w t') (or g, g t').
    std::vector<double> u(N), v(N);
    for (std::size_t j = 0; j < N; ++j) {
        const double t = j * dt;
        u[j] = w > 0 ? g[j] * std::sin(w * t) : g[j] * t;
        v[j] = w > 0 ? g[j] * std::cos(w * t) : g[j];
    }
    std::vector<double> U = reverse_cumulative(u, dt), Vc = reverse_cumulative(v, dt);
    if (Gam > 0 && gT != 0) {
        double tu, tv;
        if (w > 0) {
            const double d = Gam * Gam + w * w, s = std::sin(w * T), c = std::cos(w * T);
            tu = gT * (Gam * s + w * c) / d;
            tv = gT * (Gam * c - w * s) / d;
        } else {
            tu = gT * (T / Gam + 1 / (Gam * Gam));
            tv = gT / Gam;
        }
        for (std::size_t i = 0; i < N; ++i) {
            U[i] += tu;
            Vc[i] += tv;
        }
    }
    for (std::size_t i = 0; i < N; ++i) {
        const double t = i * dt;
        out[i] = w > 0 ? (std::cos(w * t) * U[i] - std::sin(w * t) * Vc[i]) / w : U[i] - t * Vc[i];
    }
    return out;
}

inline double simpson(const std::vector<double>& f, double dt) {
    const std::size_t N = f.size();
    if (N < 2) return 0;
    double I = 0;
    std::size_t end = (N - 1) % 2 == 0 ? N - 1 : N - 2;
    for (std::size_t j = 0; j + 2 <= end; j += 2) I += dt / 3 * (f[j] + 4 * f[j + 1] + f[j + 2]);
    if (end != N - 1) I += dt / 2 * (f[N - 2] + f[N - 1]);
    return I;
}

}  // namespace detail

// Amplitude-quadrature filter that cancels back action in g1 b1 + g2 b2:
// g1(t) = -(Omega_q^2/omega_m) int_t^inf sin(omega_m (t'-t)) g2(t') dt'.
inline std::vector<double> bae_filter(const std::vector<double>& g2, double dt, const MechanicalParams& m,
                                      double Omega_q) {
    require(Omega_q >= 0, "Omega_q must be nonnegative");
    std::vector<double> I = detail::response_integral(g2, dt, m.omega_m);
    for (double& v : I) v *= -Omega_q * Omega_q;
    return I;
}

// Back-action content of the combined readout int[g1 b1 + g2 b2]: the
// coefficient multiplying a1(t') after propagating radiation pressure through
// the mechanical response. Zero for the BAE filter.
inline std::vector<double> back_action_transfer(const std::vector<double>& g1, const std::vector<double>& g2,
                                                double dt, const MechanicalParams& m, double Omega_q) {
    require(g1.size() == g2.size(), "filters differ in length");
    std::vector<double> I = detail::response_integral(g2, dt, m.omega_m);
    std::vector<double> out(g1.size());
    for (std::size_t i = 0; i < g1.size(); ++i) out[i] = g1[i] + Omega_q * Omega_q * I[i];
    return out;
}

struct PhaseOnlyTomography {
    double Gamma = 0, nu = 0;  // filter e^{-Gamma t}(cos nu t, sin nu t), units of Omega_q
    Covariance V;              // added noise in units hbar = M = Omega_q = 1
    double D = 0;              // det/(1/4)
    int iterations = 0;
};

// Error covariance of (x0, p0) estimated from the phase quadrature alone with
// the two filters e^{-Gt}cos(nu t), e^{-Gt}sin(nu t); hbar = M = Omega_q = 1.
inline PhaseOnlyTomography phase_only_tomography(double omega_ratio, double Gamma, double nu,
                                                 std::size_t samples = 4001) {
    require(Gamma > 0 && nu > 0, "filter rates must be positive");
    require(omega_ratio >= 0, "omega_m/Omega_q must be nonnegative");
    const double w = omega_ratio;
    const double T = 40 / Gamma, dt = T / static_cast<double>(samples - 1);
    std::vector<double> ga(samples), gb(samples), ca(samples), sa(samples), cb(samples), sb(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = i * dt, e = std::exp(-Gamma * t);
        ga[i] = e * std::cos(nu * t);
        gb[i] = e * std::sin(nu * t);
        const double cx = w > 0 ? std::cos(w * t) : 1.0;
        const double sx = w > 0 ? std::sin(w * t) / w : t;
        ca[i] = ga[i] * cx;
        sa[i] = ga[i] * sx;
        cb[i] = gb[i] * cx;
        sb[i] = gb[i] * sx;
    }
    Eigen::Matrix2d H;
    H << detail::simpson(ca, dt), detail::simpson(sa, dt), detail::simpson(cb, dt), detail::simpson(sb, dt);
    // sensing noise: two-sided 1/2 per unit alpha; back action: F = alpha a1, response I_g
    const std::vector<double> Ia = detail::response_integral(ga, dt, w);
    const std::vector<double> Ib = detail::response_integral(gb, dt, w);
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> f(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) f[i] = a[i] * b[i];
        return detail::simpson(f, dt);
    };
    Eigen::Matrix2d Nm;
    Nm << 0.5 * dot(ga, ga) + 0.5 * dot(Ia, Ia), 0.5 * dot(ga, gb) + 0.5 * dot(Ia, Ib),
        0.5 * dot(gb, ga) + 0.5 * dot(Ib, Ia), 0.5 * dot(gb, gb) + 0.5 * dot(Ib, Ib);
    const Eigen::Matrix2d Hi = H.inverse();
    const Eigen::Matrix2d V = Hi * Nm * Hi.transpose();
    PhaseOnlyTomography r;
    r.Gamma = Gamma;
    r.nu = nu;
    r.V = {V(0, 0), 0.5 * (V(0, 1) + V(1, 0)), V(1, 1)};
    r.D = r.V.det() / 0.25;
    return r;
}

// Nelder-Mead over (log Gamma, log nu) minimizing det of the added noise.
inline PhaseOnlyTomography optimize_phase_only_tomography(double omega_ratio, double Gamma0 = 0.5,
                                                          double nu0 = 0.5) {
    auto f = [&](const std::vector<double>& v) {
        const double G = std::exp(v[0]), n = std::exp(v[1]);
        if (G > 1e3 || G < 1e-3 || n > 1e3 || n < 1e-3) return 1e300;
        return phase_only_tomography(omega_ratio, G, n).D;
    };
    const MinimizeResult mr = nelder_mead(f, {std::log(Gamma0), std::log(nu0)}, {0.3, 0.3}, 1e-6, 500);
    PhaseOnlyTomography r = phase_only_tomography(omega_ratio, std::exp(mr.x[0]), std::exp(mr.x[1]));
    r.iterations = mr.iterations;
    return r;
}

struct Steering {
    Covariance V_st;
    double S = 0;             // -ln(2 sqrt(det)/hbar)
    double S_verifiable = 0;  // -ln(4 sqrt(V_xx V_pp)/hbar)
    bool steerable = false;
};

// Steering ellipse is the time reverse of the tomography ellipse.
inline Steering steering_measures(const Covariance& tm, double hbar = kHbar) {
    require(tm.xx >= 0 && tm.pp >= 0, "tomography covariance must have nonnegative diagonal");
    Steering s;
    s.V_st = {tm.xx, -tm.xp, tm.pp};
    const double det = s.V_st.det();
    require(det >= -1e-12 * tm.xx * tm.pp, "tomography covariance is not positive semidefinite");
    const double inf = std::numeric_limits<double>::infinity();
    s.S = det > 0 ? -std::log(2 * std::sqrt(det) / hbar) : inf;
    const double d = tm.xx * tm.pp;
    s.S_verifiable = d > 0 ? -std::log(4 * std::sqrt(d) / hbar) : inf;
    s.steerable = s.S > 0;
    return s;
}

inline Steering steering_measures(const TomographyError& t, double hbar = kHbar) {
    return steering_measures(t.V(), hbar);
}

// Log-negativity of the mirror and outgoing light (natural log).
inline double universal_entanglement(double Omega_q, double Omega_F) {
    require(Omega_F > 0, "Omega_F must be positive");
    require(Omega_q >= 0, "Omega_q must be nonnegative");
    const double r = Omega_q / Omega_F;
    return 0.5 * std::log1p(25 * r * r / 8);
}

}  // namespace qomsim
