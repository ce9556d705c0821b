// Polarimeter readout: S2 = G S1 Fz plus optical shot noise.
#pragma once

#include <cstdint>
#include <vector>

#include "bbopm/model.hpp"
#include "bbopm/rng.hpp"
#include "bbopm/sde.hpp"

namespace bbopm {

struct PolarimeterRecord {
    std::vector<double> times;       // same grid as the source trajectory
    std::vector<double> s2_samples;  // signal units
    double sample_rate = 0.0;
    ProbeConfig probe;
};

// Detected S2 noise floor, xi2 * shot_psd (single-sided, raw record).
inline double shot_floor(const ProbeConfig& probe) {
    probe.validate();
    return probe.s2_noise_psd();
}

// Convert a spin trajectory into the detected signal. The additive noise
// is white with single-sided PSD xi2*shot_psd, i.e. per-sample variance
// xi2*shot_psd*sample_rate/2. Squeezing touches only this noise term,
// never the G S1 Fz gain. The noise stream is keyed by
// (seed, record_index, probe lane) so it is independent of the spin noise
// and reproducible record by record.
PolarimeterRecord readout(const SpinTrajectory& traj, const ProbeConfig& probe,
                          CounterRng& rng);

// Convenience overload deriving the stream from the trajectory's plan.
PolarimeterRecord readout(const SpinTrajectory& traj, const ProbeConfig& probe,
                          int record_index);

}  // namespace bbopm
