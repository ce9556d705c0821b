// Stochastic Bloch dynamics of the collective spin.
//
// The spin obeys
//   dF/dt = (-gamma B xhat + G S3 zhat) x F - Gamma F + P(t)(zhat Fmax - F) + N_F
// with Langevin noise N_F matched to the total relaxation Gamma + P(t) so
// the equilibrium per-axis variance is N_A f(f+1)/3, and S3 a white
// backaction drive from the probe's anti-squeezed ellipticity.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bbopm/model.hpp"
#include "bbopm/pump.hpp"
#include "bbopm/rng.hpp"
#include "bbopm/types.hpp"

namespace bbopm {

struct SpinState {
    Vec3 f;       // collective spin components, dimensionless
    double t = 0.0;  // seconds
};

// Discretization and record bookkeeping for one simulation run.
struct SimPlan {
    double dt = 0.0;             // integrator step, s; must subdivide the sample grid
    double record_seconds = 0.5;
    int n_records = 100;
    std::uint64_t seed = 12345;
    double sample_rate = 0.0;    // stored-output rate, Hz

    std::size_t samples_per_record() const;
    int substeps_per_sample() const;
    void validate(double f_mod_hz) const;
};

// Everything the integrator needs besides the plan. The flags exist for
// analytic-mode runs (noise off) and for backaction A/B tests; s3_psd can
// be overridden to scale the backaction drive independently of the
// detected squeezing. Noise deviates are drawn (and discarded) even when a
// flag is off, so paired-seed runs stay sample-aligned.
struct SimInputs {
    EnsembleConfig ensemble;
    FieldProgram field;
    PumpProgram pump;
    ProbeConfig probe;
    bool spin_noise = true;
    bool backaction = true;
    double s3_psd = -1.0;  // < 0: use probe.s3_noise_psd()

    double effective_s3_psd() const {
        return s3_psd < 0.0 ? probe.s3_noise_psd() : s3_psd;
    }
    void validate() const {
        ensemble.validate();
        field.validate();
        pump.validate();
        probe.validate();
    }
};

struct SpinTrajectory {
    std::vector<double> times;
    std::vector<Vec3> f_samples;
    SimPlan plan;
    SimInputs inputs;
};

// White-noise intensity of the Langevin term at pump rate p_now:
// G_NF = 2 (f(f+1)/3) N_A (Gamma + P), per axis.
double diffusion_strength(const EnsembleConfig& cfg, double p_now);

// Deterministic part of dF/dt at state.t, with the instantaneous
// backaction field value G*s3_now on the z axis.
Vec3 drift(const SpinState& state, const EnsembleConfig& cfg, const FieldProgram& field,
           const PumpProgram& pump, const ProbeConfig& probe, double s3_now);

// One integrator step of length dt. Split exact propagator: precession is
// applied as an exact rotation, relaxation/pumping as an exact
// Ornstein-Uhlenbeck update with matched noise variance, and the S3
// backaction as a per-step white field sample of variance s3_psd/(2 dt).
SpinState step(const SpinState& state, const SimInputs& in, double dt, CounterRng& rng);

// Steady-state record: integrates through a warm-up of at least
// 5/(Gamma+Pbar) (whole pump cycles), then stores samples at
// plan.sample_rate over [0, record_seconds). Deterministic given
// (plan.seed, record_index).
SpinTrajectory simulate_record(const SimPlan& plan, const SimInputs& inputs,
                               int record_index);

// All records of the plan, generated in parallel. Deterministic
// independent of thread count.
std::vector<SpinTrajectory> simulate_records(const SimPlan& plan, const SimInputs& inputs);

// Record-parallel map: fn(record_index, trajectory) is called once per
// record, from worker threads, without trajectories accumulating in
// memory. fn must only touch per-record slots.
void for_each_record(const SimPlan& plan, const SimInputs& inputs,
                     const std::function<void(int, const SpinTrajectory&)>& fn);

}  // namespace bbopm
