#pragma once

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "spectra.hpp"

namespace qomsim {

// Linear position meter on an undamped oscillator. Noise levels are two-sided:
// sF is the total white force noise (back action plus classical), sZ the
// displacement-referred white sensing noise of the record.
struct RiccatiModel {
    double M = 1;
    double omega = 0;
    double sF = 0;
    double sZ = std::numeric_limits<double>::infinity();
    double hbar = kHbar;
    double damping = 0;  // amplitude damping rate gamma_m: momentum decays at 2 gamma_m

    static RiccatiModel pure(double M, double omega, double alpha2, double hbar = kHbar) {
        return {M, omega, hbar * hbar * alpha2 / 2, 1.0 / (2 * alpha2), hbar};
    }

    static RiccatiModel with_noise(const MechanicalParams& m, const MeasurementParams& meas,
                                   double hbar = kHbar) {
        require(meas.Omega_q > 0, "Omega_q must be positive");
        const double Oq2 = meas.Omega_q * meas.Omega_q;
        const double SF = hbar * m.M * Oq2 + 2 * hbar * m.M * meas.Omega_F * meas.Omega_F;
        const double SZ = hbar / (m.M * Oq2) + 2 * hbar / (m.M * meas.Omega_x * meas.Omega_x);
        return {m.M, m.omega_m, SF / 2, SZ / 2, hbar};
    }

    double alpha2() const { return 1.0 / (2 * sZ); }
};

struct RiccatiState {
    double t = 0;
    Covariance V;
};

// Time derivative of the conditional covariance. With conditioning off the
// quadratic information-gain terms are dropped (unmonitored evolution).
inline Covariance riccati_rhs(const Covariance& V, const RiccatiModel& mdl, bool conditioning = true) {
    const double w2 = mdl.omega * mdl.omega;
    const double k = conditioning ? 1.0 / mdl.sZ : 0.0;
    const double G = 2 * mdl.damping;
    return {2 * V.xp / mdl.M - k * V.xx * V.xx,
            V.pp / mdl.M - mdl.M * w2 * V.xx - G * V.xp - k * V.xx * V.xp,
            -2 * mdl.M * w2 * V.xp - 2 * G * V.pp + mdl.sF - k * V.xp * V.xp};
}

// Pure measurement of strength alpha^2 (SI alpha^2 = M Omega_q^2 / hbar).
inline Covariance riccati_rhs(const RiccatiState& s, const MechanicalParams& m, double alpha2,
                              double hbar = kHbar) {
    require(alpha2 >= 0, "measurement strength must be nonnegative");
    if (alpha2 == 0) return riccati_rhs(s.V, {m.M, m.omega_m, 0.0, 1.0, hbar}, false);
    return riccati_rhs(s.V, RiccatiModel::pure(m.M, m.omega_m, alpha2, hbar));
}

namespace detail {

// Natural scales so the integrator sees O(1) numbers.
struct RiccatiScale {
    double xs2, xps, ps2, ws;
    RiccatiScale(const RiccatiModel& mdl, double rate) {
        ws = rate;
        xs2 = mdl.hbar / (mdl.M * ws);
        ps2 = mdl.hbar * mdl.M * ws;
        xps = mdl.hbar;
    }
    std::array<double, 3> to_u(const Covariance& V) const { return {V.xx / xs2, V.xp / xps, V.pp / ps2}; }
    Covariance to_V(const std::array<double, 3>& u) const { return {u[0] * xs2, u[1] * xps, u[2] * ps2}; }
};

inline double riccati_rate(const RiccatiModel& mdl) {
    double r = mdl.omega;
    if (std::isfinite(mdl.sZ)) r = std::max(r, std::pow(mdl.sF / (mdl.M * mdl.M * mdl.sZ), 0.25));
    return r > 0 ? r : 1.0;
}

}  // namespace detail

// Adaptive Dormand-Prince integration of the covariance equations.
inline Covariance riccati_integrate(const RiccatiModel& mdl, const Covariance& V0, double duration,
                                    bool conditioning = true, double rtol = 1e-12) {
    namespace ode = boost::numeric::odeint;
    using state = std::array<double, 3>;
    const detail::RiccatiScale sc(mdl, detail::riccati_rate(mdl));
    auto rhs = [&](const state& u, state& du, double) {
        const Covariance d = riccati_rhs(sc.to_V(u), mdl, conditioning);
        const state ds = sc.to_u(d);
        for (int i = 0; i < 3; ++i) du[i] = ds[i] / sc.ws;
    };
    state u = sc.to_u(V0);
    const double T = duration * sc.ws;
    if (T > 0) {
        auto stepper = ode::make_controlled(rtol * 1e-2, rtol, ode::runge_kutta_dopri5<state>());
        ode::integrate_adaptive(stepper, rhs, u, 0.0, T, std::min(T, 1e-3));
    }
    return sc.to_V(u);
}

// Covariance sampled on a uniform grid (n+1 points, step dt).
inline std::vector<Covariance> riccati_track(const RiccatiModel& mdl, const Covariance& V0, double dt,
                                             std::size_t n, bool conditioning = true,
                                             double rtol = 1e-10) {
    namespace ode = boost::numeric::odeint;
    using state = std::array<double, 3>;
    const detail::RiccatiScale sc(mdl, detail::riccati_rate(mdl));
    auto rhs = [&](const state& u, state& du, double) {
        const Covariance d = riccati_rhs(sc.to_V(u), mdl, conditioning);
        const state ds = sc.to_u(d);
        for (int i = 0; i < 3; ++i) du[i] = ds[i] / sc.ws;
    };
    std::vector<Covariance> out;
    out.reserve(n + 1);
    state u = sc.to_u(V0);
    auto obs = [&](const state& s, double) { out.push_back(sc.to_V(s)); };
    auto stepper = ode::make_dense_output(rtol * 1e-2, rtol, ode::runge_kutta_dopri5<state>());
    ode::integrate_n_steps(stepper, rhs, u, 0.0, dt * sc.ws, n, obs);
    return out;
}

// Closed-form steady state of the pure-measurement equations.
inline Covariance riccati_steady_state(const MechanicalParams& m, double Omega_q, bool free_mass = false,
                                       double hbar = kHbar) {
    require(Omega_q >= 0, "Omega_q must be nonnegative");
    if (free_mass || m.omega_m == 0) {
        require(free_mass, "omega_m = 0 needs the free-mass flag");
        require(Omega_q > 0, "free-mass steady state needs Omega_q > 0");
        return {hbar / (std::sqrt(2.0) * m.M * Omega_q), hbar / 2, hbar * m.M * Omega_q / std::sqrt(2.0)};
    }
    const double L = Omega_q / m.omega_m, L4 = L * L * L * L;
    const double r = std::sqrt(1 + L4), s = std::sqrt(1 + r);
    return {hbar / (std::sqrt(2.0) * m.M * m.omega_m) / s, hbar / 2 * L * L / (1 + r),
            hbar * m.M * m.omega_m / std::sqrt(2.0) * r / s};
}

// Stable solution of the filter algebraic Riccati equation (Hamiltonian method).
inline Covariance kalman_steady_state(const RiccatiModel& mdl) {
    Eigen::Matrix2d A;
    A << 0, 1 / mdl.M, -mdl.M * mdl.omega * mdl.omega, -2 * mdl.damping;
    // scale to natural units for conditioning
    const detail::RiccatiScale sc(mdl, detail::riccati_rate(mdl));
    const double xs = std::sqrt(sc.xs2), ps = std::sqrt(sc.ps2);
    Eigen::Matrix2d S = Eigen::Vector2d(1 / xs, 1 / ps).asDiagonal();
    Eigen::Matrix2d As = S * A * S.inverse() / sc.ws;
    Eigen::Matrix2d Q = Eigen::Vector2d(0, mdl.sF / sc.ps2 / sc.ws).asDiagonal();
    const double Rinv = sc.xs2 / (mdl.sZ * sc.ws);  // C = [1 0] in scaled units
    Eigen::Matrix4d H;
    H.setZero();
    H.block<2, 2>(0, 0) = As.transpose();
    H.block<2, 2>(0, 2) = -Eigen::Vector2d(Rinv, 0).asDiagonal().toDenseMatrix();
    H.block<2, 2>(2, 0) = -Q;
    H.block<2, 2>(2, 2) = -As;
    Eigen::EigenSolver<Eigen::Matrix4d> es(H);
    Eigen::Matrix<cplx, 4, 2> basis;
    int k = 0;
    for (int i = 0; i < 4 && k < 2; ++i)
        if (es.eigenvalues()[i].real() < 0) basis.col(k++) = es.eigenvectors().col(i);
    if (k != 2) throw NumericalError("Kalman Hamiltonian has no 2-dimensional stable subspace");
    const Eigen::Matrix2cd U = basis.topRows<2>(), W = basis.bottomRows<2>();
    const Eigen::Matrix2d P = (W * U.inverse()).real();
    return {P(0, 0) * sc.xs2, 0.5 * (P(0, 1) + P(1, 0)) * xs * ps, P(1, 1) * sc.ps2};
}

struct ConditionalFoM {
    double U = 1;       // purity parameter
    double S_lin = 0;   // linear entropy 1 - 1/U
    double N_eff = 0;   // U/2 - 1/2
    double S_vN = 0;    // entropy of the thermal state with occupation N_eff
};

inline ConditionalFoM fom_from_covariance(const Covariance& V, double hbar = kHbar) {
    ConditionalFoM f;
    f.U = 2 / hbar * std::sqrt(std::max(0.0, V.det()));
    f.S_lin = 1 - 1 / f.U;
    f.N_eff = f.U / 2 - 0.5;
    const double n = std::max(0.0, f.N_eff);
    f.S_vN = n > 0 ? (n + 1) * std::log(n + 1) - n * std::log(n) : 0.0;
    return f;
}

struct ConditionalResult {
    Covariance V;
    ConditionalFoM fom;
    double N_eff_formula = 0;
    bool regime_ok = true;       // Omega_q >= 10 omega_m
    bool sub_sql_window = true;  // Omega_x > 2 Omega_F
};

// Free-mass-regime conditional covariance with white classical noise.
inline ConditionalResult conditional_covariance_with_noise(const MechanicalParams& m,
                                                           const MeasurementParams& meas,
                                                           double hbar = kHbar) {
    require(meas.Omega_q > 0, "Omega_q must be positive");
    const double a = 1 + 2 * meas.xi_x() * meas.xi_x();
    const double b = 1 + 2 * meas.xi_F() * meas.xi_F();
    const double Oq = meas.Omega_q;
    ConditionalResult r;
    r.V = {hbar / (std::sqrt(2.0) * m.M * Oq) * std::pow(a, 0.75) * std::pow(b, 0.25),
           hbar / 2 * std::sqrt(a * b),
           hbar * m.M * Oq / std::sqrt(2.0) * std::pow(a, 0.25) * std::pow(b, 0.75)};
    r.fom = fom_from_covariance(r.V, hbar);
    r.N_eff_formula = (std::sqrt(a * b) - 1) / 2;
    r.regime_ok = Oq >= 10 * m.omega_m;
    r.sub_sql_window = meas.Omega_x > 2 * meas.Omega_F;
    return r;
}

inline double purity_from_spectra(double S_ZZ, double S_FF, double S_ZF, double hbar = kHbar) {
    const double d = S_ZZ * S_FF - S_ZF * S_ZF;
    if (d < 0) throw DomainError("unphysical spectra: S_ZZ S_FF - S_ZF^2 < 0");
    return std::sqrt(d) / hbar;
}

inline double cavity_bandwidth_occupation(double Omega_q_cav, double gamma, bool* valid = nullptr) {
    require(gamma > 0, "cavity bandwidth must be positive");
    if (valid) *valid = Omega_q_cav <= gamma;
    return Omega_q_cav / (4 * std::sqrt(2.0) * gamma);
}

// ---- rational functions in Omega, time dependence e^{-i Omega t} ----

struct Rational {
    cplx gain{1, 0};
    std::vector<cplx> zeros, poles;

    cplx operator()(cplx W) const {
        cplx v = gain;
        for (const cplx& z : zeros) v *= (W - z);
        for (const cplx& p : poles) v /= (W - p);
        return v;
    }
};

namespace detail {
inline double root_scale(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double s = 0;
    for (const cplx& z : a) s = std::max(s, std::abs(z));
    for (const cplx& z : b) s = std::max(s, std::abs(z));
    return s > 0 ? s : 1.0;
}
}  // namespace detail

// Remove zeros that coincide with poles.
inline Rational cancel_common(Rational r, double tol = 1e-12) {
    const double sc = detail::root_scale(r.zeros, r.poles);
    for (std::size_t i = 0; i < r.zeros.size();) {
        auto it = std::find_if(r.poles.begin(), r.poles.end(),
                               [&](const cplx& p) { return std::abs(p - r.zeros[i]) <= tol * sc; });
        if (it != r.poles.end()) {
            r.poles.erase(it);
            r.zeros.erase(r.zeros.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    return r;
}

inline Rational operator*(const Rational& a, const Rational& b) {
    Rational r{a.gain * b.gain, a.zeros, a.poles};
    r.zeros.insert(r.zeros.end(), b.zeros.begin(), b.zeros.end());
    r.poles.insert(r.poles.end(), b.poles.begin(), b.poles.end());
    return cancel_common(r);
}

inline Rational reciprocal(const Rational& a) {
    if (a.gain == cplx(0)) throw DomainError("reciprocal of the zero function");
    return {1.0 / a.gain, a.poles, a.zeros};
}

struct PFTerm {
    cplx pole;
    int order = 1;
    cplx coeff;
    cplx operator()(cplx W) const { return coeff / std::pow(W - pole, order); }
};

// Partial fractions of a strictly proper rational function, repeated poles allowed.
inline std::vector<PFTerm> partial_fractions(const Rational& f, double tol = 1e-10) {
    if (f.zeros.size() >= f.poles.size())
        throw DomainError("partial fractions need a strictly proper rational function");
    const double sc = detail::root_scale(f.zeros, f.poles);
    std::vector<std::pair<cplx, int>> groups;
    for (const cplx& p : f.poles) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return std::abs(g.first - p) <= tol * sc; });
        if (it != groups.end()) ++it->second;
        else groups.push_back({p, 1});
    }
    std::vector<PFTerm> out;
    for (const auto& [p, m] : groups) {
        // Taylor series of (W-p)^m f(W) about p, to order m-1
        std::vector<cplx> ser(m, cplx(0));
        ser[0] = f.gain;
        auto mul_linear = [&](cplx a) {  // multiply by (a + t)
            for (int j = m - 1; j >= 0; --j) ser[j] = ser[j] * a + (j > 0 ? ser[j - 1] : cplx(0));
        };
        auto mul_inverse = [&](cplx a) {  // multiply by 1/(a + t)
            std::vector<cplx> inv(m), res(m, cplx(0));
            for (int n = 0; n < m; ++n) inv[n] = (n % 2 ? -1.0 : 1.0) / std::pow(a, n + 1);
            for (int i = 0; i < m; ++i)
                for (int j = 0; i + j < m; ++j) res[i + j] += ser[i] * inv[j];
            ser = res;
        };
        for (const cplx& z : f.zeros) mul_linear(p - z);
        for (const cplx& q : f.poles)
            if (std::abs(q - p) > tol * sc) mul_inverse(p - q);
        for (int j = 0; j < m; ++j) out.push_back({p, m - j, ser[j]});
    }
    return out;
}

// Terms with poles in the closed lower half plane are causal; real-axis
// poles come from retarded responses and count as causal too.
inline std::vector<PFTerm> causal_part(const Rational& f, double tol = 1e-10) {
    const double sc = detail::root_scale(f.zeros, f.poles);
    std::vector<PFTerm> out;
    for (const PFTerm& t : partial_fractions(f, tol))
        if (t.pole.imag() <= tol * sc) out.push_back(t);
    return out;
}

inline cplx eval_terms(const std::vector<PFTerm>& terms, cplx W) {
    cplx v = 0;
    for (const PFTerm& t : terms) v += t(W);
    return v;
}

// Impulse response of causal terms: c/(W-p)^k  <->  c (-i)^k t^{k-1}/(k-1)! e^{-i p t}.
inline double causal_kernel(const std::vector<PFTerm>& terms, double t) {
    cplx v = 0;
    for (const PFTerm& term : terms) {
        cplx ik = std::pow(cplx(0, -1), term.order);
        v += term.coeff * ik * std::pow(t, term.order - 1) / std::tgamma(term.order) *
             std::exp(cplx(0, -1) * term.pole * t);
    }
    return v.real();
}

struct RationalSpectrum {
    double gain = 1;
    std::vector<cplx> zeros, poles;
    double operator()(double W) const { return Rational{gain, zeros, poles}(W).real(); }
};

// From low-to-high real coefficients of numerator and denominator.
inline RationalSpectrum rational_spectrum(const std::vector<double>& num, const std::vector<double>& den) {
    auto lead = [](const std::vector<double>& c) {
        for (auto it = c.rbegin(); it != c.rend(); ++it)
            if (*it != 0) return *it;
        return 0.0;
    };
    require(lead(den) != 0, "denominator polynomial is zero");
    return {lead(num) / lead(den), poly_roots(num), poly_roots(den)};
}

struct Factorization {
    Rational phi_plus, phi_minus;
};

// S = phi_plus * phi_minus with phi_plus free of zeros and poles in the upper half plane.
inline Factorization spectral_factorize(const RationalSpectrum& S, double tol = 1e-9) {
    require(S.gain > 0, "spectrum must be positive on the real axis");
    const double sc = detail::root_scale(S.zeros, S.poles);
    auto split = [&](const std::vector<cplx>& roots, std::vector<cplx>& plus, std::vector<cplx>& minus,
                     const char* what) {
        std::vector<std::pair<double, int>> real_groups;
        for (const cplx& r : roots) {
            if (r.imag() < -tol * sc) {
                plus.push_back(r);
            } else if (r.imag() > tol * sc) {
                minus.push_back(r);
            } else {
                auto it = std::find_if(real_groups.begin(), real_groups.end(), [&](const auto& g) {
                    return std::abs(g.first - r.real()) <= tol * sc;
                });
                if (it != real_groups.end()) ++it->second;
                else real_groups.push_back({r.real(), 1});
            }
        }
        for (const auto& [x, mult] : real_groups) {
            if (mult % 2)
                throw DomainError(std::string("spectrum has a real-axis ") + what +
                                  " of odd multiplicity; cannot factorize");
            for (int i = 0; i < mult / 2; ++i) {
                plus.push_back(x);
                minus.push_back(x);
            }
        }
    };
    Factorization f;
    const double k = std::sqrt(S.gain);
    f.phi_plus.gain = k;
    f.phi_minus.gain = k;
    std::vector<cplx> zp, zm, pp, pm;
    split(S.zeros, zp, zm, "zero");
    split(S.poles, pp, pm, "pole");
    f.phi_plus.zeros = zp;
    f.phi_plus.poles = pp;
    // phi_minus(W) = conj(phi_plus(conj W))
    for (const cplx& z : zp) f.phi_minus.zeros.push_back(std::conj(z));
    for (const cplx& p : pp) f.phi_minus.poles.push_back(std::conj(p));
    return f;
}

struct WienerFilter {
    Factorization phi;
    std::vector<cplx> kernel_poles;   // zeros of phi_plus, lower half plane
    std::vector<cplx> res_x, res_p;   // residues of the x and p filters at kernel_poles
    std::vector<double> tau, g_x, g_p;
    Covariance V;

    double gx(double t) const { return kernel(res_x, t); }
    double gp(double t) const { return kernel(res_p, t); }
    cplx gx_freq(double W) const { return transfer(res_x, W); }
    cplx gp_freq(double W) const { return transfer(res_p, W); }

private:
    double kernel(const std::vector<cplx>& r, double t) const {
        cplx v = 0;
        for (std::size_t k = 0; k < r.size(); ++k) v += cplx(0, -1) * r[k] * std::exp(cplx(0, -1) * kernel_poles[k] * t);
        return v.real();
    }
    cplx transfer(const std::vector<cplx>& r, double W) const {
        cplx v = 0;
        for (std::size_t k = 0; k < r.size(); ++k) v += r[k] / (W - kernel_poles[k]);
        return v;
    }
};

namespace detail {
// Re sum_jk a_j conj(b_k) / (i (z_j - conj z_k)) = integral over t >= 0 of h_a h_b
inline double overlap(const std::vector<cplx>& z, const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s = 0;
    for (std::size_t j = 0; j < z.size(); ++j)
        for (std::size_t k = 0; k < z.size(); ++k)
            s += a[j] * std::conj(b[k]) / (cplx(0, 1) * (z[j] - std::conj(z[k])));
    return s.real();
}
}  // namespace detail

// Causal Wiener filter for x and p from the record b = x + Z, with exact
// conditional covariance from the estimation-error spectra.
inline WienerFilter wiener_filter(const RiccatiModel& mdl, std::size_t samples = 2001) {
    require(mdl.sF > 0 && std::isfinite(mdl.sZ) && mdl.sZ > 0,
            "Wiener filter needs positive force and sensing noise");
    const double M = mdl.M, w = mdl.omega;
    // numerator of S_bb: sZ M^2 (W^2 - w^2)^2 + sF, roots W^2 = w^2 +- i kappa
    const double kappa = std::sqrt(mdl.sF / mdl.sZ) / M;
    std::vector<cplx> zeros;
    for (double sgn : {1.0, -1.0}) {
        const cplx r = std::sqrt(cplx(w * w, sgn * kappa));
        zeros.push_back(r);
        zeros.push_back(-r);
    }
    const std::vector<cplx> chi_poles{w, w, -w, -w};
    RationalSpectrum Sbb{mdl.sZ, zeros, chi_poles};
    WienerFilter wf;
    wf.phi = spectral_factorize(Sbb);

    const Rational Sxb{mdl.sF / (M * M), {}, chi_poles};
    const Rational Spb{cplx(0, -M) * (mdl.sF / (M * M)), {cplx(0)}, chi_poles};
    const Rational inv_minus = reciprocal(wf.phi.phi_minus);
    const auto cx = causal_part(Sxb * inv_minus);
    const auto cp = causal_part(Spb * inv_minus);

    const Rational& pp = wf.phi.phi_plus;
    wf.kernel_poles = pp.zeros;
    auto chi = [&](cplx W) { return -1.0 / (M * (W * W - w * w)); };
    std::vector<cplx> ex, ep;
    for (std::size_t k = 0; k < pp.zeros.size(); ++k) {
        const cplx z = pp.zeros[k];
        cplx d = pp.gain;
        for (std::size_t j = 0; j < pp.zeros.size(); ++j)
            if (j != k) d *= (z - pp.zeros[j]);
        for (const cplx& p : pp.poles) d /= (z - p);
        wf.res_x.push_back(eval_terms(cx, z) / d);
        wf.res_p.push_back(eval_terms(cp, z) / d);
        ex.push_back(-wf.res_x.back() * chi(z));
        ep.push_back(-wf.res_p.back() * chi(z));
    }
    const auto& z = wf.kernel_poles;
    wf.V.xx = mdl.sF * detail::overlap(z, ex, ex) + mdl.sZ * detail::overlap(z, wf.res_x, wf.res_x);
    wf.V.pp = mdl.sF * detail::overlap(z, ep, ep) + mdl.sZ * detail::overlap(z, wf.res_p, wf.res_p);
    wf.V.xp = 0.5 * (mdl.sF * (detail::overlap(z, ex, ep) + detail::overlap(z, ep, ex)) +
                     mdl.sZ * (detail::overlap(z, wf.res_x, wf.res_p) + detail::overlap(z, wf.res_p, wf.res_x)));

    // sample until the slowest mode has decayed by 1e-7
    double rate = std::numeric_limits<double>::infinity();
    for (const cplx& zz : z) rate = std::min(rate, -zz.imag());
    if (!(rate > 0)) throw NumericalError("Wiener filter poles are not strictly causal");
    const double T = std::log(1e7) / rate;
    wf.tau = linear_grid(0.0, T, static_cast<int>(samples));
    for (double t : wf.tau) {
        wf.g_x.push_back(wf.gx(t));
        wf.g_p.push_back(wf.gp(t));
    }
    return wf;
}

}  // namespace qomsim
