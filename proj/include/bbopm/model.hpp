// Physical parameter sets shared by every other module.
//
// All types are immutable value objects after construction and safe to
// share across threads.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bbopm/types.hpp"

namespace bbopm {

// Atomic ensemble: collective spin of N_A spin-f atoms relaxing at rate
// gamma_rel on top of whatever pumping adds.
struct EnsembleConfig {
    double atom_count = 1e6;    // N_A, dimensionless
    double spin_f = 1.0;        // spin quantum number
    double gamma = -44076544929.8648;  // 2 pi x 7.015e9; gyromagnetic ratio, rad/(s T); < 0 for 87Rb
    double gamma_rel = 0.0;     // transverse relaxation rate, 1/s

    double f_max() const { return atom_count * spin_f; }

    // Equilibrium per-axis spin variance, N_A f(f+1)/3.
    double thermal_spin_variance() const {
        return atom_count * spin_f * (spin_f + 1.0) / 3.0;
    }

    void validate() const {
        require(atom_count > 0.0, "ensemble: atom_count must be > 0");
        require(spin_f > 0.0, "ensemble: spin_f must be > 0");
        require(gamma_rel >= 0.0, "ensemble: gamma_rel must be >= 0");
        require(std::isfinite(gamma) && gamma != 0.0, "ensemble: gamma must be finite nonzero");
    }
};

// Static bias field along x plus an optional small sinusoidal test tone on
// the same axis. The tone must stay in the linear-response regime.
struct FieldProgram {
    double b0 = 0.0;              // tesla
    double tone_amplitude = 0.0;  // tesla
    double tone_frequency = 0.0;  // Hz
    double tone_phase = 0.0;      // rad
    double tone_guard = 0.01;     // max |tone|/|b0|

    double at(double t) const {
        if (tone_amplitude == 0.0) return b0;
        return b0 + tone_amplitude * std::cos(two_pi * tone_frequency * t + tone_phase);
    }

    void validate() const {
        require(std::isfinite(b0), "field: b0 must be finite");
        require(std::fabs(tone_amplitude) <= tone_guard * std::fabs(b0) ||
                    tone_amplitude == 0.0,
                "field: tone amplitude exceeds the linear-response guard");
    }
};

// Probe light: Faraday readout gain and the optical noise levels.
// shot_psd is the single-sided PSD of the raw polarimeter noise at the
// coherent-state level; squeezing scales the detected noise by xi2 and the
// conjugate (backaction-driving) component by 1/xi2, saturating the
// uncertainty relation.
struct ProbeConfig {
    double s1_flux = 1.0;       // mean Stokes-1, signal units
    double coupling = 0.0;      // G, Faraday coupling
    double shot_psd = 0.0;      // coherent-state S2 noise PSD, units^2/Hz
    double squeezing_db = 0.0;  // >= 0 means S2 squeezed
    double transmission = 1.0;  // optical power transmission eta in (0, 1]

    // squeezing factor at the detector, including absorption losses:
    // losses mix vacuum back in, xi2_eff = eta*xi2 + (1 - eta)
    double xi2() const {
        const double xi2_in = std::pow(10.0, -squeezing_db / 10.0);
        return transmission * xi2_in + (1.0 - transmission);
    }
    double anti_squeezing() const { return 1.0 / xi2(); }

    // detected S2 noise floor and the conjugate S3 noise PSD
    double s2_noise_psd() const { return xi2() * shot_psd; }
    double s3_noise_psd() const { return anti_squeezing() * shot_psd; }

    void validate() const {
        require(s1_flux > 0.0, "probe: s1_flux must be > 0");
        require(shot_psd >= 0.0, "probe: shot_psd must be >= 0");
        require(transmission > 0.0 && transmission <= 1.0,
                "probe: transmission must be in (0, 1]");
        const double x = xi2();
        require(x > 0.0 && x <= 1.0 + 1e-12, "probe: xi2 must be in (0, 1]");
    }
};

// Larmor angular frequency |gamma| * B0.
inline double derive_larmor(const EnsembleConfig& cfg, const FieldProgram& field) {
    require(field.b0 > 0.0, "derive_larmor: field b0 must be > 0");
    return std::fabs(cfg.gamma) * field.b0;
}

// Squeezing parameter from a decibel figure.
inline double xi2_from_db(double db) {
    require(std::isfinite(db), "xi2_from_db: db must be finite");
    return std::pow(10.0, -db / 10.0);
}

// Single-sided power spectral density with its averaging metadata.
struct Spectrum {
    std::vector<double> freqs;       // Hz, ascending, uniform spacing
    std::vector<double> psd;         // units^2/Hz
    std::vector<double> psd_stderr;  // one sigma per bin (empty if n_averages == 1)
    int n_averages = 1;
    std::string window = "hann";
    double record_seconds = 0.0;

    double df() const { return 1.0 / record_seconds; }

    void validate() const {
        require(freqs.size() == psd.size(), "spectrum: freqs/psd length mismatch");
        require(record_seconds > 0.0, "spectrum: record_seconds must be > 0");
        for (double p : psd) require(p >= 0.0, "spectrum: psd must be >= 0");
        if (freqs.size() > 1) {
            const double d = freqs[1] - freqs[0];
            require(std::fabs(d - df()) < 1e-9 * df(),
                    "spectrum: bin spacing must equal 1/record_seconds");
        }
    }

    // index of the bin containing f (freqs assumed to start at 0)
    std::size_t bin(double f_hz) const {
        const double d = df();
        const long k = std::lround(f_hz / d);
        require(k >= 0 && static_cast<std::size_t>(k) < freqs.size(),
                "spectrum: frequency out of range");
        return static_cast<std::size_t>(k);
    }
};

}  // namespace bbopm
