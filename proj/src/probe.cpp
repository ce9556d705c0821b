#include "bbopm/probe.hpp"

#include <cmath>

namespace bbopm {

PolarimeterRecord readout(const SpinTrajectory& traj, const ProbeConfig& probe,
                          CounterRng& rng) {
    require(!traj.f_samples.empty(), "readout: trajectory is empty");
    probe.validate();

    PolarimeterRecord rec;
    rec.times = traj.times;
    rec.sample_rate = traj.plan.sample_rate;
    rec.probe = probe;
    rec.s2_samples.resize(traj.f_samples.size());

    const double gain = probe.coupling * probe.s1_flux;
    const double noise_sigma = std::sqrt(probe.s2_noise_psd() * rec.sample_rate / 2.0);
    // always draw, so paired-seed runs with different xi2 share deviates
    for (std::size_t i = 0; i < traj.f_samples.size(); ++i) {
        rec.s2_samples[i] = gain * traj.f_samples[i].z + noise_sigma * rng.gaussian();
    }
    return rec;
}

PolarimeterRecord readout(const SpinTrajectory& traj, const ProbeConfig& probe,
                          int record_index) {
    CounterRng rng(traj.plan.seed, static_cast<std::uint64_t>(record_index),
                   RngLane::probe);
    return readout(traj, probe, rng);
}

}  // namespace bbopm
