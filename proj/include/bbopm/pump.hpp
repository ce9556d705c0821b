// Square-modulated optical pumping waveform and its cycle averages.
#pragma once

#include <cmath>
#include <complex>

#include "bbopm/types.hpp"

namespace bbopm {

// Periodic square pump: rate p0 inside a window of fractional width `duty`
// each cycle of the modulation, 0 outside. The window is centered where
// omega_mod*t = phase_center (mod 2*pi); with the default centering the
// harmonic amplitude below is real and non-negative.
struct PumpProgram {
    double p0 = 0.0;            // peak pumping rate, 1/s
    double duty = 0.1;          // fraction of cycle the pump is on, (0, 1]
    double omega_mod = 0.0;     // modulation angular frequency, rad/s
    double phase_center = 0.0;  // pulse center, rad

    void validate() const {
        require(p0 >= 0.0, "pump: p0 must be >= 0");
        require(duty > 0.0 && duty <= 1.0, "pump: duty must be in (0, 1]");
        require(omega_mod > 0.0 || duty == 1.0,
                "pump: omega_mod must be > 0 unless duty == 1");
    }
};

// Instantaneous pump rate P(t).
inline double pump_rate(const PumpProgram& prog, double t) {
    if (prog.duty >= 1.0) return prog.p0;
    // wrap the cycle phase relative to the pulse center into [-pi, pi)
    double u = (prog.omega_mod * t - prog.phase_center) / two_pi;
    u -= std::floor(u + 0.5);
    return (std::fabs(u) < 0.5 * prog.duty) ? prog.p0 : 0.0;
}

// Cycle-averaged mean rate.
inline double cycle_mean(const PumpProgram& prog) {
    return prog.p0 * prog.duty;
}

// Fundamental harmonic of the pump, (Omega/2pi) * integral of
// P(t) exp(i Omega t) dt over one cycle. Drives the resonant spin
// build-up; real-valued for the default centering.
inline std::complex<double> harmonic_amplitude(const PumpProgram& prog) {
    const double mag = prog.p0 * std::sin(std::numbers::pi * prog.duty) / std::numbers::pi;
    return std::polar(mag, prog.phase_center);
}

// Average of P over [t, t+dt], exact for the square waveform. Integrators
// use this so pulse edges never need to land on step boundaries.
inline double pump_mean_over(const PumpProgram& prog, double t, double dt) {
    if (prog.duty >= 1.0) return prog.p0;
    if (prog.p0 == 0.0) return 0.0;
    const double period = two_pi / prog.omega_mod;
    const double half_w = 0.5 * prog.duty * period;
    const double t_center = prog.phase_center / prog.omega_mod;
    // accumulate overlap of [t, t+dt] with every pulse window it touches
    double overlap = 0.0;
    const double k0 = std::floor((t - t_center - half_w) / period);
    const double k1 = std::ceil((t + dt - t_center + half_w) / period);
    for (double k = k0; k <= k1; k += 1.0) {
        const double c = t_center + k * period;
        const double lo = std::max(t, c - half_w);
        const double hi = std::min(t + dt, c + half_w);
        if (hi > lo) overlap += hi - lo;
    }
    return prog.p0 * overlap / dt;
}

}  // namespace bbopm
