#include "bbopm/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>

namespace bbopm {

std::size_t SimPlan::samples_per_record() const {
    return static_cast<std::size_t>(std::llround(record_seconds * sample_rate));
}

int SimPlan::substeps_per_sample() const {
    return static_cast<int>(std::llround(1.0 / (sample_rate * dt)));
}

void SimPlan::validate(double f_mod_hz) const {
    require(dt > 0.0 && sample_rate > 0.0, "plan: dt and sample_rate must be > 0");
    require(n_records >= 1, "plan: n_records must be >= 1");
    if (f_mod_hz > 0.0) {
        require(dt <= 1.0 / (100.0 * f_mod_hz) * (1.0 + 1e-12),
                "plan: dt must be <= 1/(100 f_mod)");
        require(sample_rate >= 4.0 * f_mod_hz, "plan: sample_rate must be >= 4 f_mod");
    }
    const double n = record_seconds * sample_rate;
    require(std::fabs(n - std::llround(n)) < 1e-6,
            "plan: record_seconds * sample_rate must be an integer");
    const double sub = 1.0 / (sample_rate * dt);
    require(std::fabs(sub - std::llround(sub)) < 1e-6,
            "plan: dt must subdivide the sample interval exactly");
}

double diffusion_strength(const EnsembleConfig& cfg, double p_now) {
    return 2.0 * cfg.thermal_spin_variance() * (cfg.gamma_rel + p_now);
}

Vec3 drift(const SpinState& state, const EnsembleConfig& cfg, const FieldProgram& field,
           const PumpProgram& pump, const ProbeConfig& probe, double s3_now) {
    const Vec3 omega{-cfg.gamma * field.at(state.t), 0.0, probe.coupling * s3_now};
    const double p = pump_rate(pump, state.t);
    Vec3 d = cross(omega, state.f);
    d += state.f * (-(cfg.gamma_rel + p));
    d.z += p * cfg.f_max();
    return d;
}

namespace {

// rotate v about unit axis, cos/sin of the angle precomputed (Rodrigues)
inline Vec3 rotate_cs(const Vec3& v, const Vec3& axis, double c, double s) {
    const Vec3 k_cross_v = cross(axis, v);
    const double k_dot_v = dot(axis, v);
    return v * c + k_cross_v * s + axis * (k_dot_v * (1.0 - c));
}

struct StepScratch {
    double v0 = 0.0;      // thermal per-axis variance
    double f_max = 0.0;
    double s3_sigma = 0.0;  // std of the per-step S3 sample
    double g = 0.0;         // coupling
    bool spin_noise = true;
    bool backaction = true;
    // relaxation factors cached per pump level; the square wave visits only
    // a handful of step-averaged values
    mutable double cached_p_bar = -1.0;
    mutable double decay = 1.0;
    mutable double drive = 0.0;
    mutable double noise_sigma = 0.0;
};

inline void refresh_relaxation(const StepScratch& sc, const SimInputs& in, double p_bar,
                               double dt) {
    const double gp = in.ensemble.gamma_rel + p_bar;
    sc.cached_p_bar = p_bar;
    sc.decay = std::exp(-gp * dt);
    const double fill = -std::expm1(-gp * dt);  // 1 - e^(-gp dt)
    sc.drive = gp > 0.0 ? (p_bar / gp) * sc.f_max * fill : 0.0;
    // exact OU transition variance, v0 (1 - e^(-2 gp dt))
    sc.noise_sigma = std::sqrt(std::max(sc.v0 * -std::expm1(-2.0 * gp * dt), 0.0));
}

Vec3 advance(Vec3 f, double t, double dt, const SimInputs& in, const StepScratch& sc,
             CounterRng& rng) {
    const Vec3 eta = rng.gaussian3();
    const double s3_raw = rng.gaussian();

    const double p_bar = pump_mean_over(in.pump, t, dt);
    if (p_bar != sc.cached_p_bar) refresh_relaxation(sc, in, p_bar, dt);

    // precession axis over this step: bias+tone field along x, backaction along z
    const double s3 = sc.backaction ? sc.s3_sigma * s3_raw : 0.0;
    const Vec3 omega{-in.ensemble.gamma * in.field.at(t + 0.5 * dt), 0.0, sc.g * s3};
    const double w = omega.norm();

    if (w > 0.0) {
        const Vec3 axis = omega * (1.0 / w);
        if (sc.drive == 0.0) {
            // no injection this step: rotation and isotropic decay commute
            f = rotate_cs(f, axis, std::cos(w * dt), std::sin(w * dt)) * sc.decay;
        } else {
            const double c = std::cos(0.5 * w * dt);
            const double s = std::sin(0.5 * w * dt);
            f = rotate_cs(f, axis, c, s);
            f = f * sc.decay;
            f.z += sc.drive;
            f = rotate_cs(f, axis, c, s);
        }
    } else {
        f = f * sc.decay;
        f.z += sc.drive;
    }

    if (sc.spin_noise) f += eta * sc.noise_sigma;
    return f;
}

StepScratch make_scratch(const SimInputs& in, double dt) {
    StepScratch sc;
    sc.v0 = in.ensemble.thermal_spin_variance();
    sc.f_max = in.ensemble.f_max();
    sc.g = in.probe.coupling;
    sc.spin_noise = in.spin_noise;
    sc.backaction = in.backaction;
    // single-sided PSD S maps to per-step variance S/(2 dt)
    sc.s3_sigma = std::sqrt(in.effective_s3_psd() / (2.0 * dt));
    return sc;
}

}  // namespace

SpinState step(const SpinState& state, const SimInputs& in, double dt, CounterRng& rng) {
    require(dt > 0.0, "step: dt must be > 0");
    const StepScratch sc = make_scratch(in, dt);
    SpinState out;
    out.f = advance(state.f, state.t, dt, in, sc, rng);
    out.t = state.t + dt;
    if (!out.f.finite())
        throw std::runtime_error("integration diverged at t = " + std::to_string(out.t));
    return out;
}

SpinTrajectory simulate_record(const SimPlan& plan, const SimInputs& inputs,
                               int record_index) {
    inputs.validate();
    const double f_mod = rad_to_hz(inputs.pump.omega_mod);
    plan.validate(f_mod);

    const double gp = inputs.ensemble.gamma_rel + cycle_mean(inputs.pump);
    require(gp > 0.0, "simulate_record: Gamma + Pbar must be > 0");

    // warm-up of at least 5/(Gamma+Pbar), rounded up to whole pump cycles
    // so every record starts at the same pump phase
    const double cycle = f_mod > 0.0 ? 1.0 / f_mod : 1.0 / gp;
    const double warm = std::ceil(5.0 / (gp * cycle)) * cycle;

    const std::size_t n_samples = plan.samples_per_record();
    const int substeps = plan.substeps_per_sample();
    const double dt = 1.0 / (plan.sample_rate * substeps);
    const StepScratch sc = make_scratch(inputs, dt);

    CounterRng rng(plan.seed, static_cast<std::uint64_t>(record_index), RngLane::spin);

    // start on the zeroth-order mean and relax in
    Vec3 f{0.0, 0.0, cycle_mean(inputs.pump) / gp * inputs.ensemble.f_max()};
    const long warm_steps = std::llround(warm / dt);
    double t = -static_cast<double>(warm_steps) * dt;
    for (long i = 0; i < warm_steps; ++i) {
        f = advance(f, t, dt, inputs, sc, rng);
        t += dt;
    }

    SpinTrajectory traj;
    traj.plan = plan;
    traj.inputs = inputs;
    traj.times.resize(n_samples);
    traj.f_samples.resize(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double t_k = static_cast<double>(k) / plan.sample_rate;
        traj.times[k] = t_k;
        traj.f_samples[k] = f;
        if (!f.finite())
            throw std::runtime_error("integration diverged at sample " + std::to_string(k) +
                                     " of record " + std::to_string(record_index));
        for (int s = 0; s < substeps; ++s) {
            f = advance(f, t_k + s * dt, dt, inputs, sc, rng);
        }
    }
    return traj;
}

void for_each_record(const SimPlan& plan, const SimInputs& inputs,
                     const std::function<void(int, const SpinTrajectory&)>& fn) {
    const int n = plan.n_records;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int n_threads = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(n)));
    if (n_threads <= 1) {
        for (int r = 0; r < n; ++r) fn(r, simulate_record(plan, inputs, r));
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_threads);
    pool.reserve(n_threads);
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int r = w; r < n; r += n_threads)
                    fn(r, simulate_record(plan, inputs, r));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<SpinTrajectory> simulate_records(const SimPlan& plan, const SimInputs& inputs) {
    std::vector<SpinTrajectory> out(plan.n_records);
    for_each_record(plan, inputs,
                    [&out](int r, const SpinTrajectory& tr) { out[r] = tr; });
    return out;
}

}  // namespace bbopm
