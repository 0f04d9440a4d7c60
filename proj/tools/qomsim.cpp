// qomsim command-line front end.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "config.hpp"
#include "output.hpp"
#include "qomsim/qomsim.hpp"

using namespace qomsim;
using namespace qomsim::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------- key tables ----------

std::vector<KeySpec> mech_keys() {
    return {{"M", Dim::mass, "oscillator mass"},
            {"omega_m", Dim::frequency, "mechanical frequency (0: free mass)"},
            {"hbar", Dim::none, "Planck constant override (1 for normalized units)"}};
}

std::vector<KeySpec> noise_keys() {
    return {{"Omega_q", Dim::frequency, "measurement strength"},
            {"Omega_F", Dim::frequency, "classical force-noise corner"},
            {"Omega_x", Dim::frequency, "classical sensing-noise corner"}};
}

std::vector<KeySpec> join(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

struct Run {
    RunConfig cfg;
    fs::path out;
    std::string format;
    unsigned threads = 0;
    std::uint64_t seed = 0;
    json report;
    std::vector<std::pair<std::string, Table>> tables;

    void table(const std::string& name, Table t) { tables.emplace_back(name, std::move(t)); }
};

double hbar_of(const RunConfig& c) { return c.positive("hbar", kHbar); }

MechanicalParams mech_of(const RunConfig& c) {
    MechanicalParams m{c.positive("M"), c.nonnegative("omega_m", 0.0), 0, 0};
    return m;
}

MeasurementParams meas_of(const RunConfig& c, bool need_q = true) {
    MeasurementParams p;
    p.Omega_q = need_q ? c.positive("Omega_q") : c.nonnegative("Omega_q", 0.0);
    p.Omega_F = c.nonnegative("Omega_F", 0.0);
    p.Omega_x = c.positive("Omega_x", std::numeric_limits<double>::infinity());
    return p;
}

std::vector<double> frequency_grid(const RunConfig& c, const std::string& lo, const std::string& hi,
                                   const std::string& per, double dlo, double dhi, long long dper) {
    // negative defaults mark required keys
    const double a = dlo < 0 ? c.number(lo) : c.number(lo, dlo), b = dhi < 0 ? c.number(hi) : c.number(hi, dhi);
    const long long n = c.integer(per, dper);
    if (!(a > 0) || !(b > a) || n < 1)
        throw ConfigError("frequency grid is empty: need 0 < " + lo + " < " + hi + " and " + per + " >= 1");
    return log_grid(a, b, static_cast<int>(n));
}

RiccatiModel model_of(const MechanicalParams& m, const MeasurementParams& meas, double hbar) {
    if (meas.Omega_F == 0 && std::isinf(meas.Omega_x)) return RiccatiModel::pure(m.M, m.omega_m, meas.alpha2(m.M, hbar), hbar);
    return RiccatiModel::with_noise(m, meas, hbar);
}

// ---------- spectrum ----------

std::vector<KeySpec> spectrum_keys() {
    return join(join(mech_keys(), noise_keys()),
                {{"mode", Dim::text, "interferometer | meter"},
                 {"grid_min", Dim::frequency, "lowest frequency"},
                 {"grid_max", Dim::frequency, "highest frequency"},
                 {"points_per_decade", Dim::integer, "grid density"},
                 {"normalize", Dim::flag, "emit Omega/ref and S/S_SQL(ref)"},
                 {"gamma", Dim::frequency, "cavity half-bandwidth"},
                 {"theta", Dim::frequency, "characteristic frequency Theta"},
                 {"I_c", Dim::power, "circulating power"},
                 {"L", Dim::length, "arm length"},
                 {"wavelength", Dim::length, "carrier wavelength"},
                 {"zeta", Dim::angle, "homodyne angle"},
                 {"q", Dim::squeeze, "input squeeze factor"},
                 {"phi", Dim::angle, "squeeze angle"},
                 {"loss", Dim::fraction, "output loss"}});
}

void cmd_spectrum(Run& r) {
    const RunConfig& c = r.cfg;
    const std::string mode = c.choice("mode", {"interferometer", "meter"});
    const MechanicalParams m = mech_of(c);
    MeasurementParams meas = meas_of(c, mode == "meter");
    meas.zeta = c.number("zeta", kPi / 2);
    meas.q = c.nonnegative("q", 0.0);
    meas.phi = c.number("phi", 0.0);
    meas.loss = c.nonnegative("loss", 0.0);
    meas.validate();
    const auto grid = frequency_grid(c, "grid_min", "grid_max", "points_per_decade", -1, -1, 100);
    const bool norm = c.flag("normalize", false);

    Table t;
    double ref = 0;
    json res;
    if (mode == "meter") {
        const NoiseBudget b = classical_noise_budget(m, meas, grid);
        ref = meas.Omega_q;
        for (std::size_t i = 0; i < grid.size(); ++i)
            t.rows.push_back({grid[i], b.shot.S[i], b.back_action.S[i], b.force_classical.S[i], b.sensing_classical.S[i],
                              b.total.S[i], b.sql.S[i]});
        res["beat_factor_analytic"] = num(b.beat_factor_analytic);
        if (meas.Omega_F > 0 && std::isfinite(meas.Omega_x)) {
            res["beat_factor_numeric"] = num(b.beat_factor_numeric);
            res["beat_frequency_numeric"] = num(b.beat_frequency_numeric);
        }
    } else {
        OpticalParams o;
        o.gamma = c.positive("gamma");
        o.omega0 = 2 * kPi * kLightSpeed / c.positive("wavelength", 1064e-9);
        if (c.has("theta") == c.has("I_c")) throw ConfigError("interferometer mode needs exactly one of 'theta' and 'I_c'");
        o.L = c.positive("L", c.has("theta") ? 1.0 : std::optional<double>{});
        o.I_c = c.has("theta") ? OpticalParams::power_for_theta(c.positive("theta"), m.M, o.L, o.omega0) : c.positive("I_c");
        ref = o.gamma;
        for (double W : grid) {
            const TunedNoise tn = tuned_readout_noise(o, m, meas, W);
            const double chi2 = std::pow(m.M * (W * W - m.omega_m * m.omega_m), 2);
            const double shot = (tn.shot_F + tn.cross_F) / chi2, ba = tn.back_action_F / chi2;
            const double fcl = meas.S_nF(m.M) / chi2, scl = meas.S_nx(m.M);
            if (std::isnan(shot) || std::isnan(ba))
                throw NumericalError("readout noise is undefined at omega = " + std::to_string(W) +
                                     " rad/s (grid point on the mechanical resonance)");
            t.rows.push_back({W, shot, ba, fcl, scl, shot + ba + fcl + scl, sql_displacement(m, W)});
        }
        res["theta"] = num(o.theta(m.M));
        res["I_c"] = num(o.I_c);
        res["omega0"] = num(o.omega0);
    }
    // location of the closest approach to the SQL
    double best = std::numeric_limits<double>::infinity(), best_w = 0;
    for (const auto& row : t.rows)
        if (row[6] > 0 && std::isfinite(row[6]) && row[5] / row[6] < best) {
            best = row[5] / row[6];
            best_w = row[0];
        }
    res["min_total_over_sql"] = num(best);
    res["omega_at_min"] = num(best_w);
    res["reference_omega"] = num(ref);
    if (norm) {
        const double s_ref = sql_displacement(m, ref);
        if (!std::isfinite(s_ref)) throw ConfigError("normalization frequency coincides with omega_m");
        for (auto& row : t.rows) {
            row[0] /= ref;
            for (std::size_t k = 1; k < row.size(); ++k) row[k] /= s_ref;
        }
        res["sql_at_reference"] = num(s_ref);
        t.columns = {"omega_over_ref", "shot", "back_action", "force_cl", "sensing_cl", "total", "sql"};
    } else {
        t.columns = {"omega_rad_s", "shot", "back_action", "force_cl", "sensing_cl", "total", "sql"};
    }
    res["units"] = norm ? "S/S_SQL(reference)" : units_name(Units::displacement);
    r.report["results"] = res;
    r.table("spectrum", std::move(t));
}

// ---------- conditional ----------

std::vector<KeySpec> conditional_keys() {
    return join(join(mech_keys(), noise_keys()), {{"kernel_samples", Dim::integer, "Wiener kernel samples"}});
}

void cmd_conditional(Run& r) {
    const RunConfig& c = r.cfg;
    const double hbar = hbar_of(c);
    const MechanicalParams m = mech_of(c);
    const MeasurementParams meas = meas_of(c);
    meas.validate();
    const long long ns = c.integer("kernel_samples", 2001);
    if (ns < 16) throw ConfigError("key 'kernel_samples' must be at least 16");
    const RiccatiModel mdl = model_of(m, meas, hbar);
    const bool pure = meas.Omega_F == 0 && std::isinf(meas.Omega_x);

    json res;
    const Covariance K = kalman_steady_state(mdl);
    res["kalman"] = cov_json(K);
    if (pure) {
        res["closed_form"] = cov_json(riccati_steady_state(m, meas.Omega_q, m.omega_m == 0, hbar));
    } else if (m.omega_m == 0) {
        const ConditionalResult cr = conditional_covariance_with_noise(m, meas, hbar);
        res["closed_form"] = cov_json(cr.V);
        res["N_eff_formula"] = num(cr.N_eff_formula);
        res["sub_sql_window"] = cr.sub_sql_window;
    }
    const WienerFilter wf = wiener_filter(mdl, static_cast<std::size_t>(ns));
    res["wiener"] = cov_json(wf.V);
    res["g_x0"] = num(wf.gx(0));
    res["g_p0"] = num(wf.gp(0));
    const ConditionalFoM f = fom_from_covariance(K, hbar);
    res["U"] = num(f.U);
    res["S_lin"] = num(f.S_lin);
    res["N_eff"] = num(f.N_eff);
    res["S_vN"] = num(f.S_vN);
    if (m.omega_m > 0) res["regime_ok"] = meas.Omega_q >= 10 * m.omega_m;
    const ControlledState cs = optimal_controlled_state(K, hbar);
    res["controlled"] = {{"V_xx", num(cs.V_xx)}, {"V_pp", num(cs.V_pp)}, {"lambda", num(cs.lambda)}, {"N_eff", num(cs.N_eff)}};
    r.report["results"] = res;

    Table t{{"tau_s", "g_x", "g_p"}, {}};
    for (std::size_t i = 0; i < wf.tau.size(); ++i) t.rows.push_back({wf.tau[i], wf.g_x[i], wf.g_p[i]});
    r.table("kernels", std::move(t));
}

// ---------- trajectory ----------

std::vector<KeySpec> trajectory_keys() {
    return join(join(mech_keys(), noise_keys()),
                {{"mode", Dim::text, "conditional | estimation"},
                 {"duration", Dim::time, "simulated time"},
                 {"dt", Dim::time, "time step"},
                 {"n_traj", Dim::integer, "ensemble size"},
                 {"stride", Dim::integer, "store every stride-th step"},
                 {"level", Dim::integer, "Wiener refinement level"},
                 {"initial", Dim::text, "steady | ground | custom"},
                 {"V_xx0", Dim::none, "custom initial V_xx, m^2"},
                 {"V_xp0", Dim::none, "custom initial V_xp, J s"},
                 {"V_pp0", Dim::none, "custom initial V_pp, (kg m/s)^2"},
                 {"mean_x0", Dim::none, "initial mean position, m"},
                 {"mean_p0", Dim::none, "initial mean momentum, kg m/s"},
                 {"max_files", Dim::integer, "trajectories written out (csv format)"}});
}

void cmd_trajectory(Run& r) {
    const RunConfig& c = r.cfg;
    const double hbar = hbar_of(c);
    const MechanicalParams m = mech_of(c);
    const MeasurementParams meas = meas_of(c);
    meas.validate();
    const RiccatiModel mdl = model_of(m, meas, hbar);
    const std::string mode = c.choice("mode", {"conditional", "estimation"});
    SimConfig s;
    s.duration = c.positive("duration");
    s.dt = c.positive("dt");
    const long long n_traj = c.integer("n_traj", 100), stride = c.integer("stride", 1), level = c.integer("level", 0);
    if (n_traj < 1) throw ConfigError("key 'n_traj' must be at least 1");
    if (stride < 1) throw ConfigError("key 'stride' must be at least 1");
    if (level < 0 || level > 20) throw ConfigError("key 'level' must lie in [0, 20]");
    s.n_traj = static_cast<std::size_t>(n_traj);
    s.stride = static_cast<std::size_t>(stride);
    s.level = static_cast<int>(level);
    s.seed = r.seed;
    s.threads = r.threads;
    const std::string init = c.choice("initial", {"steady", "ground", "custom"});
    if (init == "steady") {
        s.initial.V = kalman_steady_state(mdl);
    } else if (init == "ground") {
        if (m.omega_m == 0) throw ConfigError("initial = ground needs omega_m > 0");
        s.initial = GaussianState::ground(m, hbar);
    } else {
        s.initial.V = {c.positive("V_xx0"), c.number("V_xp0", 0.0), c.positive("V_pp0")};
        if (s.initial.V.det() < hbar * hbar / 4 * (1 - 1e-9)) throw ConfigError("custom initial covariance violates the uncertainty relation");
    }
    s.initial.mean_x = c.number("mean_x0", 0.0);
    s.initial.mean_p = c.number("mean_p0", 0.0);
    const long long max_files = c.integer("max_files", 100);
    if (max_files < 0) throw ConfigError("key 'max_files' must be nonnegative");

    json res;
    res["n_traj"] = s.n_traj;
    res["steps"] = static_cast<std::uint64_t>(std::llround(s.duration / s.dt));
    if (mode == "estimation") {
        const EstimationStats st = simulate_estimation(mdl, s);
        Table t{{"t", "res_xx", "res_xp", "res_pp", "pred_xx", "pred_xp", "pred_pp", "mean_res_x", "mean_res_p"}, {}};
        for (std::size_t i = 0; i < st.t.size(); ++i) {
            const Covariance &a = st.residual[i], &b = st.predicted[i];
            t.rows.push_back({st.t[i], a.xx, a.xp, a.pp, b.xx, b.xp, b.pp, st.mean_residual_x[i], st.mean_residual_p[i]});
        }
        res["final_residual"] = cov_json(st.residual.back());
        res["final_predicted"] = cov_json(st.predicted.back());
        r.report["results"] = res;
        r.table("estimation", std::move(t));
        return;
    }

    const auto ens = simulate_conditional(mdl, s);
    const EnsembleMoments em = ensemble_moments(ens);
    // unconditional covariance on the stored grid
    const auto unc = riccati_track(mdl, s.initial.V, s.dt * s.stride, em.t.size() - 1, false);
    Table t{{"t", "means_xx", "means_xp", "means_pp", "cond_xx", "cond_xp", "cond_pp", "uncond_xx", "uncond_xp", "uncond_pp"}, {}};
    for (std::size_t i = 0; i < em.t.size(); ++i) {
        const Covariance &a = em.means[i], &b = em.conditional[i], &u = unc[i];
        t.rows.push_back({em.t[i], a.xx, a.xp, a.pp, b.xx, b.xp, b.pp, u.xx, u.xp, u.pp});
    }
    res["final_means_covariance"] = cov_json(em.means.back());
    res["final_conditional"] = cov_json(em.conditional.back());
    res["final_unconditional"] = cov_json(unc.back());
    r.report["results"] = res;
    r.table("ensemble", std::move(t));

    const std::vector<std::string> cols{"t", "dy", "mean_x", "mean_p", "V_xx", "V_xp", "V_pp"};
    const std::size_t nf = std::min<std::size_t>(ens.size(), static_cast<std::size_t>(max_files));
    for (std::size_t j = 0; j < nf; ++j) {
        const TrajectoryRecord& tr = ens[j];
        Table tt{cols, {}};
        for (std::size_t i = 0; i < tr.t.size(); ++i)
            tt.rows.push_back({tr.t[i], tr.dy[i], tr.mean_x[i], tr.mean_p[i], tr.V[i].xx, tr.V[i].xp, tr.V[i].pp});
        char name[48];
        std::snprintf(name, sizeof name, "trajectories/traj_%06zu", j);
        r.table(name, std::move(tt));
    }
}

// ---------- control ----------

std::vector<KeySpec> control_keys() {
    return {{"M", Dim::mass, "oscillator mass"},
            {"omega_m", Dim::frequency, "mechanical frequency"},
            {"gamma_m", Dim::frequency, "amplitude damping rate"},
            {"Q", Dim::none, "quality factor (alternative to gamma_m)"},
            {"T_m", Dim::temperature, "bath temperature"},
            {"Omega_q", Dim::frequency, "evaluate at this measurement strength"},
            {"T_ratio_min", Dim::none, "sweep start, T_m/T_c"},
            {"T_ratio_max", Dim::none, "sweep end, T_m/T_c"},
            {"T_ratio_points", Dim::integer, "sweep points"},
            {"dilution", Dim::none, "omega_opt/omega_m for the Qf criterion"},
            {"gamma", Dim::frequency, "cavity half-bandwidth (radiation damping)"},
            {"Delta", Dim::frequency, "cavity detuning (radiation damping)"},
            {"I_c", Dim::power, "circulating power (radiation damping)"},
            {"L", Dim::length, "cavity length (radiation damping)"},
            {"wavelength", Dim::length, "carrier wavelength"}};
}

json feedback_json(const FeedbackCooling& f) {
    return {{"T_ratio", num(f.T_ratio)}, {"N_eff_opt", num(f.N_eff_opt)}, {"Omega_q_opt", num(f.Omega_q_opt)},
            {"N_eff_scaling", num(f.N_eff_scaling)}, {"N_eff_strong_limit", num(f.N_eff_strong_limit)}, {"plateau", f.plateau}};
}

void cmd_control(Run& r) {
    const RunConfig& c = r.cfg;
    MechanicalParams m{c.positive("M"), c.positive("omega_m"), 0, c.nonnegative("T_m", 0.0)};
    if (c.has("gamma_m") == c.has("Q")) throw ConfigError("give exactly one of 'gamma_m' and 'Q'");
    m.gamma_m = c.has("gamma_m") ? c.positive("gamma_m") : m.omega_m / (2 * c.positive("Q"));
    json res;
    const double Tc = critical_temperature(m);
    res["Q"] = num(m.Q());
    res["T_c"] = num(Tc);
    res["thermal_force_level"] = num(thermal_force_level(m));
    res["at_T_m"] = feedback_json(optimize_feedback_cooling(m));
    if (c.has("Omega_q")) {
        const ControlledState s = feedback_cooling_state(m, c.positive("Omega_q"));
        res["at_Omega_q"] = {{"V_xx", num(s.V_xx)}, {"V_pp", num(s.V_pp)}, {"lambda", num(s.lambda)}, {"N_eff", num(s.N_eff)}};
    }
    if (c.has("dilution")) {
        const QfResult q = qf_criterion(m, c.number("dilution"));
        res["qf"] = {{"Qf_benchmark", num(q.Qf_benchmark)}, {"Qf_required", num(q.Qf_required)},
                     {"relaxation", num(q.relaxation)}, {"n_bar", num(q.n_bar)}};
    }
    if (c.has("Delta")) {
        OpticalParams o;
        o.gamma = c.positive("gamma");
        o.Delta = c.number("Delta");
        o.I_c = c.positive("I_c");
        o.L = c.positive("L");
        o.omega0 = 2 * kPi * kLightSpeed / c.positive("wavelength", 1064e-9);
        const RadiationDamping rd = radiation_damping(o, m);
        const RecoveryResult rec = feedback_recovery_gain(o, m);
        res["radiation_damping"] = {{"gamma_opt", num(rd.gamma_opt)}, {"n_opt", num(rd.n_opt)}, {"validity", num(rd.validity)}};
        res["recovery"] = {{"n_damping", num(rec.n_damping)}, {"n_conditional", num(rec.n_conditional)},
                           {"n_feedback", num(rec.n_feedback)}, {"Omega_q", num(rec.Omega_q)}};
    }
    r.report["results"] = res;

    const double lo = c.positive("T_ratio_min", 1e-4), hi = c.positive("T_ratio_max", 1e2);
    const long long n = c.integer("T_ratio_points", 25);
    if (!(hi > lo) || n < 2) throw ConfigError("T_m/T_c sweep needs T_ratio_max > T_ratio_min and at least 2 points");
    std::vector<FeedbackCooling> sweep(static_cast<std::size_t>(n));
    parallel_for(sweep.size(), r.threads, [&](std::size_t i) {
        MechanicalParams mi = m;
        mi.T_m = Tc * lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
        sweep[i] = optimize_feedback_cooling(mi);
    });
    Table t{{"T_ratio", "N_eff_opt", "Omega_q_opt", "N_eff_scaling", "N_eff_strong_limit", "plateau"}, {}};
    for (const auto& f : sweep)
        t.rows.push_back({f.T_ratio, f.N_eff_opt, f.Omega_q_opt, f.N_eff_scaling, f.N_eff_strong_limit, f.plateau ? 1.0 : 0.0});
    r.table("cooling_sweep", std::move(t));
}

// ---------- tomography ----------

std::vector<KeySpec> tomography_keys() {
    return join(join(mech_keys(), noise_keys()),
                {{"q", Dim::squeeze, "verification squeeze factor"},
                 {"sweep_min", Dim::frequency, "Omega_q sweep start"},
                 {"sweep_max", Dim::frequency, "Omega_q sweep end"},
                 {"points_per_decade", Dim::integer, "sweep density"},
                 {"phase_only", Dim::flag, "also optimize phase-quadrature-only filters"}});
}

json tomography_json(const TomographyError& t, const Steering& s) {
    return {{"V_add", cov_json(t.V())}, {"D", num(t.D)}, {"D_closed", num(t.D_closed)}, {"Lambda_x", num(t.Lambda_x)},
            {"sub_heisenberg", t.sub_heisenberg}, {"regime_ok", t.regime_ok}, {"steering_S", num(s.S)},
            {"steering_S_verifiable", num(s.S_verifiable)}, {"steerable", s.steerable}};
}

void cmd_tomography(Run& r) {
    const RunConfig& c = r.cfg;
    const double hbar = hbar_of(c);
    const MechanicalParams m = mech_of(c);
    MeasurementParams meas = meas_of(c);
    meas.q = c.nonnegative("q", 0.0);
    meas.validate();
    json res = tomography_json(tomography_error(m, meas, hbar), steering_measures(tomography_error(m, meas, hbar), hbar));
    if (meas.Omega_F > 0) res["log_negativity"] = num(universal_entanglement(meas.Omega_q, meas.Omega_F));
    if (c.flag("phase_only", false)) {
        const PhaseOnlyTomography p = optimize_phase_only_tomography(m.omega_m / meas.Omega_q);
        res["phase_only"] = {{"Gamma_over_Omega_q", num(p.Gamma)}, {"nu_over_Omega_q", num(p.nu)}, {"D", num(p.D)}};
    }
    r.report["results"] = res;
    const auto grid = frequency_grid(c, "sweep_min", "sweep_max", "points_per_decade", meas.Omega_q / 100,
                                     meas.Omega_q * 100, 20);
    Table t{{"Omega_q", "D", "D_closed", "steering_S", "steering_S_verifiable", "log_negativity"}, {}};
    for (double Oq : grid) {
        MeasurementParams mq = meas;
        mq.Omega_q = Oq;
        const TomographyError te = tomography_error(m, mq, hbar);
        const Steering st = steering_measures(te, hbar);
        t.rows.push_back({Oq, te.D, te.D_closed, st.S, st.S_verifiable, meas.Omega_F > 0 ? universal_entanglement(Oq, meas.Omega_F) : 0.0});
    }
    r.table("tomography", std::move(t));
}

// ---------- teleport ----------

std::vector<KeySpec> teleport_keys() {
    return {{"omega_opt", Dim::none, "optical-spring frequency (units with hbar = M = 1)"},
            {"Omega_q", Dim::none, "measurement strength (optimized if absent)"},
            {"eps_fb", Dim::none, "feedback gain (optimized if absent)"},
            {"q", Dim::squeeze, "squeeze factor"},
            {"Omega_F", Dim::none, "classical force-noise corner"},
            {"Omega_x", Dim::none, "classical sensing-noise corner"},
            {"sweep_min", Dim::none, "omega_opt sweep start"},
            {"sweep_max", Dim::none, "omega_opt sweep end"},
            {"points_per_decade", Dim::integer, "sweep density"},
            {"mirror_mass", Dim::mass, "strong-coupling check: mirror mass"},
            {"mirror_omega", Dim::frequency, "strong-coupling check: mechanical frequency"},
            {"wavelength", Dim::length, "strong-coupling check: wavelength"},
            {"finesse", Dim::none, "strong-coupling check: cavity finesse"}};
}

json noise_json(const TeleportNoise& n) {
    return {{"V_xx", num(n.V_xx)}, {"V_pp", num(n.V_pp)}, {"det_ratio", num(n.det_ratio)}, {"zeta_x", num(n.zeta_x)},
            {"zeta_F", num(n.zeta_F)}, {"Omega_plus", num(n.modes.Omega_plus)}, {"Omega_minus", num(n.modes.Omega_minus)},
            {"tau_ex", num(n.modes.tau_ex)}};
}

void cmd_teleport(Run& r) {
    const RunConfig& c = r.cfg;
    const double w = c.positive("omega_opt"), q = c.nonnegative("q", 0.0);
    const double OF = c.positive("Omega_F"), Ox = c.positive("Omega_x");
    json res;
    res["asymptote"] = num(teleport_asymptotic_det(q, OF, Ox));
    if (c.has("Omega_q") != c.has("eps_fb")) throw ConfigError("give both 'Omega_q' and 'eps_fb', or neither to optimize");
    if (c.has("Omega_q")) {
        const TeleportParams p{w, c.positive("Omega_q"), c.nonnegative("eps_fb"), q, OF, Ox};
        res["fixed"] = noise_json(teleport_added_noise(p));
        res["fixed"]["growth_rate"] = num(teleport_growth_rate(w, p.eps_fb * p.Omega_q));
    }
    const TeleportOptimum o = optimize_teleport(w, q, OF, Ox);
    res["optimum"] = {{"Omega_q", num(o.best.Omega_q)}, {"eps_fb", num(o.best.eps_fb)}, {"det_ratio", num(o.det_ratio)},
                      {"relative_gap", num(o.relative_gap)}};
    if (Ox >= OF) {
        const EntanglementWindow ew = entanglement_window(OF, Ox / OF, q, 0, 1);
        res["entanglement_window"] = {{"Omega_q", num(ew.Omega_q)}, {"survival_time", num(ew.survival_time)},
                                      {"N_eff_conditional", num(ew.N_eff_conditional)}, {"tomography_D", num(ew.tomography_D)},
                                      {"feasible", ew.feasible}};
    }
    if (c.has("finesse")) {
        const MechanicalParams mm{c.positive("mirror_mass"), c.positive("mirror_omega"), 0, 0};
        const StrongCoupling sc = strong_coupling_ratio(mm, c.positive("wavelength", 1064e-9), c.positive("finesse"));
        res["strong_coupling"] = {{"r", num(sc.r)}, {"r_momentum", num(sc.r_momentum)}, {"verdict", verdict_name(sc.verdict)}};
    }
    r.report["results"] = res;

    const auto grid = frequency_grid(c, "sweep_min", "sweep_max", "points_per_decade", 1.0, 100.0, 5);
    std::vector<TeleportOptimum> sweep(grid.size());
    parallel_for(grid.size(), r.threads, [&](std::size_t i) { sweep[i] = optimize_teleport(grid[i], q, OF, Ox); });
    Table t{{"omega_opt", "det_ratio", "asymptote", "Omega_q", "eps_fb"}, {}};
    for (const auto& s : sweep) t.rows.push_back({s.best.omega_opt, s.det_ratio, s.asymptote, s.best.Omega_q, s.best.eps_fb});
    r.table("teleport_sweep", std::move(t));
}

// ---------- mqm ----------

std::vector<KeySpec> mqm_keys() {
    return {{"rho0", Dim::density, "bulk density"},
            {"m_atom", Dim::mass, "atomic mass"},
            {"Lambda", Dim::none, "mass concentration factor"},
            {"dx_zp", Dim::length, "zero-point spread per atom (alternative to Lambda)"},
            {"omega_c", Dim::frequency, "trap frequency"},
            {"M", Dim::mass, "test-mass mass (for the coupling constant)"},
            {"Omega_q", Dim::frequency, "measurement strength (for the cycle count)"},
            {"sweep_min", Dim::frequency, "trap-frequency sweep start"},
            {"sweep_max", Dim::frequency, "trap-frequency sweep end"},
            {"points_per_decade", Dim::integer, "sweep density"}};
}

void cmd_mqm(Run& r) {
    const RunConfig& c = r.cfg;
    const MaterialParams si = MaterialParams::silicon();
    const double rho0 = c.positive("rho0", si.rho0), m_atom = c.positive("m_atom", si.m_atom);
    if (c.has("Lambda") && c.has("dx_zp")) throw ConfigError("give at most one of 'Lambda' and 'dx_zp'");
    const MaterialParams mat = c.has("dx_zp") ? MaterialParams{rho0, m_atom, c.positive("dx_zp")}
                                              : MaterialParams::from_concentration(rho0, m_atom, c.positive("Lambda", si.Lambda()));
    const double wc = c.positive("omega_c", 2 * kPi * 10);
    const SNSplit s = sn_frequency_split(wc, mat);
    json res;
    res["Lambda"] = num(mat.Lambda());
    res["dx_zp"] = num(mat.dx_zp);
    res["omega_SN"] = num(s.omega_SN);
    res["omega_q"] = num(s.omega_q);
    res["split"] = num(s.split);
    res["Q_required"] = num(s.Q_required);
    res["Q_ratio_literal"] = num(s.Q_ratio_literal);
    res["threshold_time_uniform"] = num(gravity_decoherence_cycles(1, rho0).threshold_time);
    res["threshold_time_concentrated"] = num(gravity_decoherence_cycles(1, rho0, mat.Lambda()).threshold_time);
    if (c.has("Omega_q")) res["cycles"] = num(gravity_decoherence_cycles(c.positive("Omega_q"), rho0, mat.Lambda()).cycles);
    if (c.has("M")) res["coupling_C"] = num(sn_coupling(mat, c.positive("M")));
    r.report["results"] = res;

    const auto grid = frequency_grid(c, "sweep_min", "sweep_max", "points_per_decade", 2 * kPi, 2 * kPi * 1e3, 10);
    Table t{{"omega_c", "Q_required", "split"}, {}};
    for (double w : grid) {
        const SNSplit x = sn_frequency_split(w, mat);
        t.rows.push_back({w, x.Q_required, x.split});
    }
    r.table("sn_sweep", std::move(t));
}

// ---------- driver ----------

struct Subcommand {
    std::string name, help;
    std::vector<KeySpec> (*keys)();
    void (*run)(Run&);
};

const std::vector<Subcommand>& subcommands() {
    static const std::vector<Subcommand> all{
        {"spectrum", "noise budget curves", spectrum_keys, cmd_spectrum},
        {"conditional", "steady conditional state and Wiener kernels", conditional_keys, cmd_conditional},
        {"trajectory", "stochastic conditional-state ensembles", trajectory_keys, cmd_trajectory},
        {"control", "feedback cooling and occupation limits", control_keys, cmd_control},
        {"tomography", "state verification error and steering", tomography_keys, cmd_tomography},
        {"teleport", "two-oscillator teleportation noise", teleport_keys, cmd_teleport},
        {"mqm", "self-gravity and gravity-decoherence numbers", mqm_keys, cmd_mqm},
    };
    return all;
}

int execute(const Subcommand& sc, const std::string& config, const std::optional<std::string>& out,
            const std::optional<std::string>& format, const std::optional<std::string>& seed) {
    RunConfig cfg(sc.name, sc.keys());
    cfg.load(config);
    if (out) cfg.set("out", *out);
    if (format) cfg.set("format", *format);
    if (seed) cfg.set("seed", *seed);
    Run r{cfg, fs::path(cfg.text("out", ".")), cfg.choice("format", {"csv", "json"}), 0, 0, json::object(), {}};
    const long long seed_v = cfg.integer("seed", 0), threads = cfg.integer("threads", 0);
    if (seed_v < 0) throw ConfigError("key 'seed' must be nonnegative");
    if (threads < 0) throw ConfigError("key 'threads' must be nonnegative");
    r.seed = static_cast<std::uint64_t>(seed_v);
    r.threads = thread_count(static_cast<unsigned>(threads));

    sc.run(r);

    json report;
    report["subcommand"] = sc.name;
    report["config"] = cfg.echo();
    report["results"] = r.report["results"];
    fs::create_directories(r.out);
    if (r.format == "json") {
        json curves = json::object();
        if (sc.name == "trajectory") {
            // ensemble plus one entry per written trajectory
            json trajs = json::array();
            for (const auto& [name, t] : r.tables) {
                if (name.rfind("trajectories/", 0) == 0) {
                    json e = t.to_json();
                    e["index"] = trajs.size();
                    e["seed"] = r.seed;
                    trajs.push_back(e);
                } else {
                    curves[name] = t.to_json();
                }
            }
            if (!trajs.empty()) report["trajectories"] = trajs;
        } else {
            for (const auto& [name, t] : r.tables) curves[name] = t.to_json();
        }
        report["curves"] = curves;
    } else {
        json files = json::array();
        for (const auto& [name, t] : r.tables) {
            const fs::path p = r.out / (name + ".csv");
            fs::create_directories(p.parent_path());
            write_csv(p, t);
            files.push_back(name + ".csv");
        }
        report["files"] = files;
    }
    write_json(r.out / "report.json", report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qomsim: quantum optomechanics simulator"};
    app.require_subcommand(1);
    std::string config;
    std::optional<std::string> out, format, seed;
    for (const auto& sc : subcommands()) {
        CLI::App* sub = app.add_subcommand(sc.name, sc.help);
        sub->add_option("--config", config, "flat key = value file (or a JSON report)")->required();
        sub->add_option("--out", out, "output directory");
        sub->add_option("--format", format, "csv | json");
        sub->add_option("--seed", seed, "random seed");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const Subcommand* chosen = nullptr;
    for (const auto& sc : subcommands())
        if (app.got_subcommand(sc.name)) chosen = &sc;
    try {
        return execute(*chosen, config, out, format, seed);
    } catch (const ConfigError& e) {
        std::cerr << "qomsim " << chosen->name << ": config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "qomsim " << chosen->name << ": invalid parameters: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "qomsim " << chosen->name << ": numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "qomsim " << chosen->name << ": " << e.what() << "\n";
        return 1;
    }
}
