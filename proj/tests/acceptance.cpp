// Acceptance run: one line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "qomsim/qomsim.hpp"

using namespace qomsim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

const double kOF = 1 / std::sqrt(50.0), kOx = std::sqrt(50.0);
const double kTenDB = std::log(10.0) / 2;

Outcome sql_benchmark() {
    const MechanicalParams m = MechanicalParams::free_mass(10);
    const double v = std::sqrt(sql_displacement(m, 2 * kPi * 100));
    return {rel(v, 1.5e-20) < 0.02, fmt("sqrt(S_x^SQL) = %.4g m/rtHz, target 1.5e-20 (off by %.1f%%)", v, 100 * rel(v, 1.5e-20))};
}

Outcome circulating_power() {
    const double w = 2 * kPi * 100;
    const double omega0 = 2 * kPi * kLightSpeed / 1064e-9;
    const double Ic = OpticalParams::power_for_theta(w, 10, 4000, omega0);
    return {rel(Ic, 830e3) < 0.10, fmt("I_c = %.4g W, target 8.3e5 (off by %.1f%%)", Ic, 100 * rel(Ic, 830e3))};
}

Outcome bae_bound() {
    const double v = bae_loss_limit(kTenDB, 0.01);
    return {rel(v, 1 / 5.6) < 0.02, fmt("(e^-2q eps)^1/4 = %.5f, 1/5.6 = %.5f", v, 1 / 5.6)};
}

Outcome riccati_oracle() {
    const MechanicalParams m{1e-3, 2 * kPi * 100, 0, 0};
    double worst = 0, worst_det = 0;
    for (double L : {0.3, 1.0, 3.0}) {
        const double Oq = L * m.omega_m;
        const RiccatiModel mdl = RiccatiModel::pure(m.M, m.omega_m, m.M * Oq * Oq / kHbar);
        const Covariance target = riccati_steady_state(m, Oq);
        const Covariance g = GaussianState::ground(m).V;
        const Covariance V = riccati_integrate(mdl, {10 * g.xx, 0, 10 * g.pp}, 100 / std::min(Oq, m.omega_m));
        worst = std::max({worst, rel(V.xx, target.xx), rel(V.xp, target.xp), rel(V.pp, target.pp)});
        const double h = kHbar * kHbar / 4;
        worst_det = std::max({worst_det, rel(V.det(), h), rel(target.det(), h)});
    }
    return {worst < 1e-8 && worst_det < 1e-10,
            fmt("max rel deviation %.2e (need 1e-8), purity %.2e (need 1e-10)", worst, worst_det)};
}

Outcome conditional_fom() {
    const MechanicalParams fm = MechanicalParams::free_mass(1);
    double worst = 0;
    for (double ratio : {10.0, 25.0, 50.0}) {
        MeasurementParams meas;
        meas.Omega_F = 1;
        meas.Omega_x = ratio;
        meas.Omega_q = std::sqrt(ratio);
        const Covariance V = kalman_steady_state(RiccatiModel::with_noise(fm, meas, 1));
        worst = std::max(worst, rel(fom_from_covariance(V, 1).N_eff, 1 / ratio));
    }
    MeasurementParams touch;
    touch.Omega_F = 1;
    touch.Omega_x = 2;
    touch.Omega_q = std::sqrt(2.0);
    const double n = fom_from_covariance(kalman_steady_state(RiccatiModel::with_noise(fm, touch, 1)), 1).N_eff;
    return {worst < 0.01 && rel(n, 0.5) < 0.01,
            fmt("max rel deviation from Omega_F/Omega_x %.2e; SQL-touching N_eff = %.6f", worst, n)};
}

Outcome triple_agreement() {
    const MechanicalParams m{1, 1, 0, 0};
    double ab = 0;
    for (double L : {0.3, 1.0, 3.0}) {
        const RiccatiModel mdl = RiccatiModel::pure(1, 1, L * L, 1);
        const Covariance a = riccati_steady_state(m, L, false, 1);
        const Covariance b = wiener_filter(mdl).V;
        ab = std::max({ab, rel(b.xx, a.xx), rel(b.xp, a.xp), rel(b.pp, a.pp)});
    }
    const RiccatiModel mdl = RiccatiModel::pure(1, 1, 1, 1);
    const Covariance a = riccati_steady_state(m, 1, false, 1);
    SimConfig c;
    c.duration = 4;
    c.dt = 0.002;
    c.n_traj = 10000;
    c.seed = 2024;
    c.stride = static_cast<std::size_t>(std::llround(c.duration / c.dt));
    c.initial.V = a;
    const EstimationStats st = simulate_estimation(mdl, c);
    const Covariance& R = st.residual.back();
    const double N = static_cast<double>(c.n_traj);
    const double zxx = (R.xx - a.xx) / std::sqrt(2 * a.xx * a.xx / N);
    const double zxp = (R.xp - a.xp) / std::sqrt((a.xx * a.pp + a.xp * a.xp) / N);
    const double zpp = (R.pp - a.pp) / std::sqrt(2 * a.pp * a.pp / N);
    const bool ok = ab < 1e-6 && std::abs(zxx) < 3 && std::abs(zxp) < 3 && std::abs(zpp) < 3;
    return {ok, fmt("closed form vs Wiener %.2e; ensemble z-scores xx %.2f xp %.2f pp %.2f", ab, zxx, zxp, zpp)};
}

Outcome total_variance() {
    const RiccatiModel mdl = RiccatiModel::pure(1, 1, 1, 1);
    SimConfig c;
    c.duration = 5;
    c.dt = 0.001;
    c.n_traj = 10000;
    c.stride = 500;
    c.seed = 7;
    c.initial.V = {2.0, 0.3, 1.5};
    const EnsembleMoments em = ensemble_moments(simulate_conditional(mdl, c));
    const double N = static_cast<double>(c.n_traj);
    double zmax = 0;
    for (std::size_t s = 1; s < em.t.size(); ++s) {
        const Covariance U = riccati_integrate(mdl, c.initial.V, em.t[s], false);
        const Covariance& mm = em.means[s];
        const Covariance& V = em.conditional[s];
        zmax = std::max({zmax, std::abs(mm.xx + V.xx - U.xx) / std::sqrt(2 * mm.xx * mm.xx / N),
                         std::abs(mm.xp + V.xp - U.xp) / std::sqrt((mm.xx * mm.pp + mm.xp * mm.xp) / N),
                         std::abs(mm.pp + V.pp - U.pp) / std::sqrt(2 * mm.pp * mm.pp / N)});
    }
    return {em.t.size() == 11 && zmax < 3, fmt("%.0f checkpoints, max |z| = %.2f", em.t.size() - 1.0, zmax)};
}

Outcome control_limits() {
    const Covariance V = riccati_steady_state(MechanicalParams::free_mass(1), 1e3, true, 1);
    const double n = optimal_controlled_state(V, 1).N_eff;
    MechanicalParams m{1e-3, 2 * kPi * 1e3, 2 * kPi * 1e3 / (2 * 1e7), 0};
    const double Tc = critical_temperature(m);
    const double Tc_oracle = kHbar * m.omega_m * m.Q() / (2 * std::sqrt(2.0) * kBoltzmann);
    m.T_m = Tc / 100;
    const FeedbackCooling fc = optimize_feedback_cooling(m);
    const double dev = rel(fc.N_eff_opt, fc.N_eff_scaling);
    return {rel(n, 1 / std::sqrt(2.0)) < 0.01 && rel(Tc, Tc_oracle) < 1e-12 && dev < 0.15,
            fmt("strong-measurement N_eff = %.6f; T_c = %.4g K; sweep N_eff %.4g vs scaling %.4g", n, Tc,
                fc.N_eff_opt, fc.N_eff_scaling)};
}

Outcome tomography_det() {
    const MechanicalParams fm = MechanicalParams::free_mass(1);
    double worst = 0;
    for (double Oq : {0.3, 1.0, 3.0, 10.0, 30.0})
        for (double Ox : {1.0, 3.0, 10.0, 30.0, 100.0})
            for (double q : {0.0, 0.5, kTenDB}) {
                MeasurementParams meas;
                meas.Omega_q = Oq;
                meas.Omega_F = 0.2;
                meas.Omega_x = Ox;
                meas.q = q;
                const TomographyError t = tomography_error(fm, meas, 1);
                worst = std::max(worst, rel(t.D, t.D_closed));
            }
    MeasurementParams zero;
    zero.Omega_q = 2;
    zero.Omega_F = 0;
    zero.Omega_x = 5;
    const TomographyError z = tomography_error(fm, zero, 1);
    const bool zero_ok = z.D == 0 && z.V_xx == 0 && z.V_pp == 0 && z.V_xp == 0;
    return {worst < 1e-10 && zero_ok,
            fmt("matrix det vs closed form: max rel deviation %.3g (ratio %.3g); xi_F = 0 gives zero: ", worst,
                1 + worst) + (zero_ok ? "yes" : "no")};
}

Outcome teleport_optimum() {
    const TeleportOptimum o = optimize_teleport(30, kTenDB, kOF, kOx);
    return {std::abs(o.relative_gap) < 0.10,
            fmt("det/(1/4) = %.5f vs asymptote %.5f (gap %.2e)", o.det_ratio, o.asymptote, o.relative_gap)};
}

Outcome mqm_numbers() {
    const MaterialParams si = MaterialParams::silicon();
    const double wSN = sn_frequency_split(1.0, si).omega_SN;
    const double t1 = gravity_decoherence_cycles(1, si.rho0).threshold_time;
    const double t2 = gravity_decoherence_cycles(1, si.rho0, si.Lambda()).threshold_time;
    return {rel(wSN, 0.036) < 0.03 && rel(t1, 2.5e3) < 0.05 && rel(t2, 28) < 0.05,
            fmt("omega_SN = %.4f 1/s; thresholds %.0f s and %.1f s", wSN, t1, t2)};
}

Outcome breathing() {
    BreathingSetup s;
    s.Omega_F = kOF;
    s.Omega_x = kOx;
    s.Omega_q_verify = 3;
    s.squeeze_q = kTenDB;
    s.Omega_q = 0.23;
    s.Omega_opt = 1.2;
    const BreathingResult r1 = three_stage_experiment(s);
    s.Omega_q = 2.5;
    s.Omega_opt = 0.8;
    const BreathingResult r2 = three_stage_experiment(s);
    return {r1.sub_vacuum_dips == 5 && r2.below_at_zero,
            fmt("scenario 1: %.0f sub-vacuum dips (need 5); scenario 2 below vacuum at 0: ", r1.sub_vacuum_dips) +
                (r2.below_at_zero ? "yes" : "no")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        double limit_s;  // 0: no runtime bound
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all{
        {1, 1, sql_benchmark},      {2, 1, circulating_power}, {3, 0, bae_bound},
        {4, 5, riccati_oracle},     {5, 0, conditional_fom},   {6, 120, triple_agreement},
        {7, 0, total_variance},     {8, 0, control_limits},    {9, 0, tomography_det},
        {10, 0, teleport_optimum},  {11, 0, mqm_numbers},      {12, 60, breathing},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs >= c.limit_s) {
            o.pass = false;
            o.detail += fmt(" [runtime %.2f s over %.0f s]", secs, c.limit_s);
        }
        std::printf("criterion %d: %s  %s  (%.3f s)\n", c.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed ? 1 : 0;
}
