// Closed-form model: rotating-frame steady state, magnetic response,
// noise spectra, sensitivity, squeezing enhancement, and the 3 dB
// measurement bandwidth. All frequency arguments are angular (rad/s);
// conversions to Hz happen only at reporting boundaries.
#pragma once

#include <complex>

#include "bbopm/model.hpp"
#include "bbopm/pump.hpp"

namespace bbopm {

// Parameters of the demodulated-signal noise model. s_sigma and s_shot are
// the white spin-noise and optical-noise contributions to the v-quadrature
// PSD (demodulated convention), s_shot_sql the optical term at the
// coherent-state level.
struct AnalyticParams {
    double delta_omega = 0.0;  // response bandwidth Gamma + Pbar, rad/s
    double u_mean = 0.0;       // in-phase amplitude G S1 F+^(0), signal units
    double gamma = 0.0;        // gyromagnetic ratio, rad/(s T)
    double s_sigma = 0.0;      // spin-noise contribution, signal^2/Hz
    double s_shot = 0.0;       // detected optical floor xi2 * s_shot_sql
    double s_shot_sql = 0.0;   // coherent-state optical floor
    double xi2 = 1.0;          // squeezing parameter

    double zeta2() const { return s_sigma / s_shot_sql; }

    void validate() const {
        require(delta_omega > 0.0, "analytic: delta_omega must be > 0");
        require(s_sigma >= 0.0 && s_shot >= 0.0 && s_shot_sql >= 0.0,
                "analytic: PSDs must be >= 0");
        require(xi2 > 0.0 && xi2 <= 1.0 + 1e-12, "analytic: xi2 must be in (0, 1]");
    }

    // convenience builder from the dimensionless ratios
    static AnalyticParams from_ratios(double delta_omega_rad, double zeta2, double xi2,
                                      double s_shot_sql = 1.0, double u_mean = 1.0,
                                      double gamma = 1.0) {
        AnalyticParams p;
        p.delta_omega = delta_omega_rad;
        p.u_mean = u_mean;
        p.gamma = gamma;
        p.s_shot_sql = s_shot_sql;
        p.s_sigma = zeta2 * s_shot_sql;
        p.xi2 = xi2;
        p.s_shot = xi2 * s_shot_sql;
        return p;
    }
};

// Rotating-frame steady-state spin amplitude,
// F+^(0) = P+ Fmax / (i (omega_L - Omega) + Gamma + Pbar).
std::complex<double> steady_state(const EnsembleConfig& cfg, const PumpProgram& pump,
                                  double detuning_rad);

// Magnetic response R(omega) = gamma <u> / (-i omega + delta_omega).
std::complex<double> responsivity(const AnalyticParams& p, double omega_rad);

// Lorentzian line shape L(omega) = dw^2 / (omega^2 + dw^2); equals the
// normalized |R(omega)/R(0)|^2.
double lineshape(const AnalyticParams& p, double omega_rad);

// Demodulated signal noise PSD, S_v = s_shot + L(omega) s_sigma.
double signal_noise_spectrum(const AnalyticParams& p, double omega_rad);

// Magnetic noise density S_B = (dw^2/gamma^2 <u>^2)(s_sigma + s_shot/L).
double sensitivity(const AnalyticParams& p, double omega_rad);

// Squeezed-to-SQL magnetic PSD ratio, (L zeta2 + xi2) / (L zeta2 + 1).
// This is the form that follows from the sensitivity formula when the
// optical floor drops to xi2 times its coherent value; see
// squeezed_ratio_printed_form for the alternative in circulation.
double squeezed_ratio(const AnalyticParams& p, double omega_rad);

// The ratio in the printed arrangement (1 + L xi2/zeta2)/(1 + L/zeta2).
// Kept for comparison only: it disagrees with the sensitivity formula and
// with the quoted enhancement numbers, so it is not used anywhere else.
double squeezed_ratio_printed_form(const AnalyticParams& p, double omega_rad);

// Frequencies at which S_B doubles its low-frequency value, in Hz:
// SQL, dw sqrt(zeta2 + 1); squeezed, scaled by
// sqrt((1 + zeta2/xi2)/(1 + zeta2)).
struct Bandwidth3dB {
    double sql_hz = 0.0;
    double squeezed_hz = 0.0;
};
Bandwidth3dB bandwidth_3db(const AnalyticParams& p);

// First-order transfer function at arbitrary pump-Larmor detuning: the
// v-quadrature response per unit field drive, from the coupled
// two-quadrature frequency-domain solve. At zero detuning it reduces to
// responsivity()/gamma/<u> times <u> (asserted in tests).
std::complex<double> quadrature_response(const AnalyticParams& p, double omega_rad,
                                         double detuning_rad);

}  // namespace bbopm
