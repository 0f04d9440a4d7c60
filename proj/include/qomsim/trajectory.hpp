#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include "conditional.hpp"
#include "verification.hpp"

namespace qomsim {

// Worker count: explicit request, else hardware concurrency; QOMSIM_THREADS caps both.
inline unsigned thread_count(unsigned requested = 0) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QOMSIM_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, n);
}

// Runs fn(i) for i in [0, n). Callers write into slot i only, so results do not
// depend on scheduling.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    threads = static_cast<unsigned>(std::min<std::size_t>(thread_count(threads), std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    auto work = [&] {
        try {
            for (std::size_t i; !failed && (i = next++) < n;) fn(i);
        } catch (...) {
            if (!failed.exchange(true)) err = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k + 1 < threads; ++k) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::uint64_t index = 0;  // trajectory number within the ensemble
    std::vector<double> t;
    std::vector<double> dy;   // record increments over each stored interval, units of alpha*x*dt
    std::vector<double> mean_x, mean_p;
    std::vector<Covariance> V;
};

struct SimConfig {
    double duration = 0;
    double dt = 0;
    std::uint64_t seed = 0;
    std::size_t n_traj = 1;
    std::size_t stride = 1;    // store every stride-th step
    GaussianState initial;     // common initial mean and covariance
    int level = 0;             // WienerSource refinement level (path sharing across dt)
    unsigned threads = 0;
    bool zero_noise = false;   // deterministic path (all increments zero)
};

namespace detail {

inline std::size_t step_count(const RiccatiModel& mdl, const SimConfig& c) {
    require(c.n_traj >= 1, "n_traj must be at least 1");
    require(c.stride >= 1, "stride must be at least 1");
    require(c.duration > 0 && c.dt > 0, "duration and dt must be positive");
    require(mdl.sF >= 0 && mdl.sZ > 0, "noise levels must be positive");
    const double rate = std::max(mdl.omega, riccati_rate(mdl));
    const double bound = 0.01 / rate;
    if (c.dt > bound * (1 + 1e-12))
        throw DomainError("dt = " + std::to_string(c.dt) + " exceeds the stability bound 0.01/max(omega_m, Omega_q) = " +
                          std::to_string(bound));
    return static_cast<std::size_t>(std::llround(c.duration / c.dt));
}

}  // namespace detail

// Conditional means driven by the innovation of the record (Euler-Maruyama, Ito).
// dy = alpha <x> dt + dW/sqrt2 with alpha^2 = 1/(2 sZ); the covariance track is
// deterministic and shared by all trajectories.
inline std::vector<TrajectoryRecord> simulate_conditional(const RiccatiModel& mdl, const SimConfig& c) {
    const std::size_t n = detail::step_count(mdl, c);
    const std::vector<Covariance> track = riccati_track(mdl, c.initial.V, c.dt, n);
    if (track.size() != n + 1) throw NumericalError("covariance track has the wrong length");
    const double alpha = std::sqrt(mdl.alpha2());
    const double sqZ = std::sqrt(mdl.sZ);
    const double w2 = mdl.omega * mdl.omega, G = 2 * mdl.damping;
    const WienerSource src{c.seed, c.dt, c.level};

    std::vector<TrajectoryRecord> out(c.n_traj);
    parallel_for(c.n_traj, c.threads, [&](std::size_t j) {
        TrajectoryRecord& r = out[j];
        r.seed = c.seed;
        r.index = j;
        const std::size_t m = n / c.stride + 1;
        r.t.reserve(m);
        r.dy.reserve(m);
        r.mean_x.reserve(m);
        r.mean_p.reserve(m);
        r.V.reserve(m);
        double x = c.initial.mean_x, p = c.initial.mean_p, acc = 0;
        auto store = [&](std::size_t k) {
            r.t.push_back(k * c.dt);
            r.dy.push_back(acc);
            r.mean_x.push_back(x);
            r.mean_p.push_back(p);
            r.V.push_back(track[k]);
            acc = 0;
        };
        store(0);
        for (std::size_t k = 0; k < n; ++k) {
            const double dW = c.zero_noise ? 0.0 : src.increment(j, k);
            const Covariance& V = track[k];
            const double dI = sqZ * dW;  // innovation in displacement units
            acc += alpha * (x * c.dt + dI);
            const double xn = x + p / mdl.M * c.dt + V.xx / mdl.sZ * dI;
            const double pn = p - (mdl.M * w2 * x + G * p) * c.dt + V.xp / mdl.sZ * dI;
            x = xn;
            p = pn;
            if ((k + 1) % c.stride == 0) store(k + 1);
        }
    });
    return out;
}

struct EstimationStats {
    std::vector<double> t;
    std::vector<Covariance> residual;   // ensemble second moments of (true - estimate)
    std::vector<Covariance> predicted;  // filter covariance at the same times
    std::vector<double> mean_residual_x, mean_residual_p;
    std::size_t n_traj = 0;
};

// Truth-plus-filter simulation: the true state is driven by force noise,
// the record adds sensing noise, and a Kalman filter runs on the record.
// Residual moments are measured at every stride-th step.
inline EstimationStats simulate_estimation(const RiccatiModel& mdl, const SimConfig& c) {
    const std::size_t n = detail::step_count(mdl, c);
    const std::vector<Covariance> track = riccati_track(mdl, c.initial.V, c.dt, n);
    const double w2 = mdl.omega * mdl.omega, G = 2 * mdl.damping;
    const double sqF = std::sqrt(mdl.sF), sqZ = std::sqrt(mdl.sZ);
    const WienerSource src{c.seed, c.dt, c.level};
    const std::size_t m = n / c.stride + 1;

    // truth starts at a draw from N(mean, V0)
    const Covariance& V0 = c.initial.V;
    require(V0.xx > 0 && V0.det() >= 0, "initial covariance must be positive semidefinite");
    const double l11 = std::sqrt(V0.xx), l21 = V0.xp / l11, l22 = std::sqrt(std::max(0.0, V0.pp - l21 * l21));

    std::vector<double> ex(c.n_traj * m), ep(c.n_traj * m);
    parallel_for(c.n_traj, c.threads, [&](std::size_t j) {
        const double z1 = src.normal(j, 0, 10), z2 = src.normal(j, 0, 11);
        double X = c.initial.mean_x + l11 * z1, P = c.initial.mean_p + l21 * z1 + l22 * z2;
        double x = c.initial.mean_x, p = c.initial.mean_p;
        std::size_t s = 0;
        ex[j * m] = X - x;
        ep[j * m] = P - p;
        for (std::size_t k = 0; k < n; ++k) {
            const double dWF = src.increment(j, k, 1), dWZ = src.increment(j, k, 2);
            const double dyx = X * c.dt + sqZ * dWZ;
            const double innov = dyx - x * c.dt;
            const Covariance& V = track[k];
            const double Xn = X + P / mdl.M * c.dt;
            const double Pn = P - (mdl.M * w2 * X + G * P) * c.dt + sqF * dWF;
            const double xn = x + p / mdl.M * c.dt + V.xx / mdl.sZ * innov;
            const double pn = p - (mdl.M * w2 * x + G * p) * c.dt + V.xp / mdl.sZ * innov;
            X = Xn;
            P = Pn;
            x = xn;
            p = pn;
            if ((k + 1) % c.stride == 0) {
                ++s;
                ex[j * m + s] = X - x;
                ep[j * m + s] = P - p;
            }
        }
    });

    EstimationStats st;
    st.n_traj = c.n_traj;
    for (std::size_t s = 0; s < m; ++s) {
        double sx = 0, sp = 0, sxx = 0, sxp = 0, spp = 0;
        for (std::size_t j = 0; j < c.n_traj; ++j) {
            const double a = ex[j * m + s], b = ep[j * m + s];
            sx += a;
            sp += b;
            sxx += a * a;
            sxp += a * b;
            spp += b * b;
        }
        const double N = static_cast<double>(c.n_traj);
        st.t.push_back(s * c.stride * c.dt);
        st.residual.push_back({sxx / N, sxp / N, spp / N});
        st.predicted.push_back(track[s * c.stride]);
        st.mean_residual_x.push_back(sx / N);
        st.mean_residual_p.push_back(sp / N);
    }
    return st;
}

struct EnsembleMoments {
    std::vector<double> t;
    std::vector<Covariance> means;  // ensemble covariance of the conditional means
    std::vector<Covariance> conditional;
};

// Ensemble (co)variance of the stored conditional means, in index order.
inline EnsembleMoments ensemble_moments(const std::vector<TrajectoryRecord>& ens) {
    require(!ens.empty(), "empty ensemble");
    EnsembleMoments em;
    em.t = ens.front().t;
    em.conditional = ens.front().V;
    const double N = static_cast<double>(ens.size());
    for (std::size_t s = 0; s < em.t.size(); ++s) {
        double mx = 0, mp = 0;
        for (const auto& r : ens) {
            mx += r.mean_x[s];
            mp += r.mean_p[s];
        }
        mx /= N;
        mp /= N;
        Covariance c;
        for (const auto& r : ens) {
            const double a = r.mean_x[s] - mx, b = r.mean_p[s] - mp;
            c.xx += a * a;
            c.xp += a * b;
            c.pp += b * b;
        }
        em.means.push_back({c.xx / N, c.xp / N, c.pp / N});
    }
    return em;
}

// Measurement whose record is discarded: the covariance follows the moment
// equations without the information-gain terms; means rotate freely.
inline GaussianState unconditional_evolve(const RiccatiModel& mdl, const GaussianState& init, double duration) {
    require(duration >= 0, "duration must be nonnegative");
    require(mdl.damping == 0, "analytic mean rotation assumes no damping");
    GaussianState out;
    const double w = mdl.omega, t = duration;
    if (w > 0) {
        const double c = std::cos(w * t), s = std::sin(w * t);
        out.mean_x = init.mean_x * c + init.mean_p * s / (mdl.M * w);
        out.mean_p = init.mean_p * c - mdl.M * w * init.mean_x * s;
    } else {
        out.mean_x = init.mean_x + init.mean_p * t / mdl.M;
        out.mean_p = init.mean_p;
    }
    RiccatiModel m = mdl;
    if (!std::isfinite(m.sZ)) m.sZ = 1;  // unused without conditioning
    out.V = duration > 0 ? riccati_integrate(m, init.V, duration, false) : init.V;
    return out;
}

inline GaussianState unconditional_evolve(const MechanicalParams& mech, double alpha2, const GaussianState& init,
                                          double duration, double hbar = kHbar) {
    RiccatiModel m{mech.M, mech.omega_m, hbar * hbar * alpha2 / 2, 1.0, hbar};
    return unconditional_evolve(m, init, duration);
}

// ---- three-stage breathing experiment ----

struct BreathingSetup {
    double M = 1;
    double hbar = 1;
    // preparation (free-mass conditioning)
    double Omega_q = 0;
    double Omega_F = 0;
    double Omega_x = std::numeric_limits<double>::infinity();
    // evolution
    double Omega_opt = 0;
    double tau_max = 0;       // 0: run until thermal diffusion alone exceeds twice the vacuum level
    std::size_t samples_per_period = 400;
    bool monitor_b1 = true;   // removes back-action diffusion during evolution
    // verification
    double Omega_q_verify = 0;
    double squeeze_q = 0;
};

struct BreathingResult {
    std::vector<double> tau, dx2;  // verified variance of x vs evolution time
    double vacuum = 0;             // hbar/(2 M Omega_opt)
    Covariance prepared, V_add;
    int sub_vacuum_dips = 0;
    bool below_at_zero = false;
};

// Unmonitored oscillator covariance after time t with white force diffusion D.
inline Covariance free_oscillator_covariance(const Covariance& V, double M, double w, double D, double t) {
    if (w == 0)
        return {V.xx + 2 * V.xp * t / M + V.pp * t * t / (M * M) + D * t * t * t / (3 * M * M),
                V.xp + V.pp * t / M + D * t * t / (2 * M), V.pp + D * t};
    const double c = std::cos(w * t), s = std::sin(w * t), Mw = M * w;
    Covariance r;
    r.xx = V.xx * c * c + 2 * V.xp * c * s / Mw + V.pp * s * s / (Mw * Mw) +
           D / (Mw * Mw) * (t / 2 - std::sin(2 * w * t) / (4 * w));
    r.xp = -Mw * V.xx * c * s + V.xp * (c * c - s * s) + V.pp * c * s / Mw + D / (Mw * w) * s * s / 2;
    r.pp = Mw * Mw * V.xx * s * s - 2 * Mw * V.xp * c * s + V.pp * c * c + D * (t / 2 + std::sin(2 * w * t) / (4 * w));
    return r;
}

inline BreathingResult three_stage_experiment(const BreathingSetup& s) {
    require(s.M > 0 && s.hbar > 0, "mass and hbar must be positive");
    require(s.Omega_q > 0, "preparation Omega_q missing");
    require(s.Omega_opt > 0, "evolution Omega_opt missing");
    require(s.Omega_q_verify > 0, "verification Omega_q missing");
    require(s.samples_per_period >= 16, "need at least 16 samples per period");

    BreathingResult r;
    const MechanicalParams fm = MechanicalParams::free_mass(s.M);
    MeasurementParams prep;
    prep.Omega_q = s.Omega_q;
    prep.Omega_F = s.Omega_F;
    prep.Omega_x = s.Omega_x;
    r.prepared = conditional_covariance_with_noise(fm, prep, s.hbar).V;

    MeasurementParams ver;
    ver.Omega_q = s.Omega_q_verify;
    ver.Omega_F = s.Omega_F;
    ver.Omega_x = s.Omega_x;
    ver.q = s.squeeze_q;
    const TomographyError te = tomography_error(fm, ver, s.hbar);
    r.V_add = {te.V_xx, te.V_xp, te.V_pp};

    // two-sided force diffusion: classical, plus back action if b1 is not monitored
    double D = s.hbar * s.M * s.Omega_F * s.Omega_F;
    if (!s.monitor_b1) D += s.hbar * s.M * s.Omega_q * s.Omega_q / 2;
    r.vacuum = s.hbar / (2 * s.M * s.Omega_opt);

    double tau_max = s.tau_max;
    if (tau_max <= 0) {
        require(D > 0, "automatic evolution span needs nonzero force noise");
        // diffusion contribution D t/(2 M^2 w^2) reaches twice the vacuum level
        tau_max = 4 * r.vacuum * s.M * s.M * s.Omega_opt * s.Omega_opt / D;
    }
    const double period = 2 * kPi / s.Omega_opt;
    const auto n = static_cast<std::size_t>(std::ceil(tau_max / period * s.samples_per_period));
    bool below_prev = false;
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = tau_max * k / n;
        const Covariance V = free_oscillator_covariance(r.prepared, s.M, s.Omega_opt, D, t);
        const double v = V.xx + r.V_add.xx;
        r.tau.push_back(t);
        r.dx2.push_back(v);
        const bool below = v < r.vacuum;
        if (below && !below_prev) ++r.sub_vacuum_dips;
        below_prev = below;
    }
    r.below_at_zero = r.dx2.front() < r.vacuum;
    return r;
}

}  // namespace qomsim
