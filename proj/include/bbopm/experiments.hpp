// Scenario runners reproducing the measurement procedures: field-scan
// calibration, responsivity sweep, sensitivity spectra with the squeezer
// on/off, and the backaction A/B test.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bbopm/analytic.hpp"
#include "bbopm/config.hpp"
#include "bbopm/dsp.hpp"
#include "bbopm/sde.hpp"

namespace bbopm {

// Demodulated noise picks up both sidebands: white raw noise of PSD S
// appears at 2S in u and v under the amplitude-true (gain 2) lock-in.
inline constexpr double demod_noise_gain = 2.0;

// Analytic parameter set matching a run configuration, in the demodulated
// convention (optical floor 2 xi2 shot_psd, spin term 4 (G S1)^2 V0 / dw).
AnalyticParams analytic_params_from_config(const RunConfig& cfg);

// One batch of records pushed through simulate -> readout -> lock_in,
// reduced to what the experiments need.
struct DemodSet {
    Spectrum v_spectrum;
    double u_mean = 0.0;              // grand mean of the in-phase output
    double v_mean = 0.0;
    std::vector<double> record_u_mean;
    std::vector<double> record_v_mean;
    std::vector<double> record_var_fx;  // per-record variance of F_x
    double demod_rate = 0.0;
};

// phase = lock-in reference phase. Pass trimmed_demod_phase(cfg) to work
// in the zeroed-quadrature convention the experiments use.
DemodSet run_demod(const RunConfig& cfg, const SimInputs& inputs, int n_records,
                   std::uint64_t seed, double phase);

// Reference phase that nulls the on-resonance quadrature output, found
// from one deterministic (noise-free) record. The pump-harmonic sidebands
// rotate the demodulated signal by a small fixed angle at low Q; the
// operator trims it away exactly as done on the bench.
double trimmed_demod_phase(const RunConfig& cfg);

// Raw (undemodulated) polarimeter spectrum, for broadband noise floors.
Spectrum raw_spectrum(const RunConfig& cfg, const SimInputs& inputs, int n_records,
                      std::uint64_t seed);

// Mean and one-sigma error of the PSD over [fmin, fmax].
Measured band_average(const Spectrum& spec, double fmin_hz, double fmax_hz);

// Demodulated optical noise floor from an atoms-off run (the spins held at
// zero, optics and DSP untouched). Anchors the noise-model knee fit the
// same way the bench procedure pins the shot-noise dashed line.
Measured measured_shot_floor(const RunConfig& cfg, const ProbeConfig& probe,
                             int n_records, std::uint64_t seed);

// Integrated tone power at f_hz (local floor subtracted), units^2.
Measured tone_power(const Spectrum& spec, double f_hz);

// --- field-scan calibration -------------------------------------------------

struct FieldScanResult {
    std::vector<double> b_values;     // tesla
    std::vector<double> detuning;     // omega_L - Omega, rad/s
    std::vector<double> v_means;      // per point
    std::vector<double> u_means;
    Measured slope;                   // dv/dB, signal units per tesla
    double v_at_resonance = 0.0;
};

// Sweeps the static field across the resonance at fixed pump frequency and
// fits the central linear region of the dispersive v curve.
// noise_free runs the deterministic model instead of the stochastic one.
FieldScanResult field_scan_calibration(const RunConfig& cfg, bool noise_free = false);

// --- responsivity sweep -----------------------------------------------------

struct ResponsivitySweep {
    std::vector<double> freqs_hz;
    std::vector<Measured> power;       // integrated tone power per frequency
    std::vector<Measured> normalized;  // power relative to the lowest frequency
    Measured delta_omega_hz;           // knee of the fitted zero-centered Lorentzian
};

ResponsivitySweep responsivity_sweep(const RunConfig& cfg);

// --- sensitivity ------------------------------------------------------------

struct SensitivityArm {
    Spectrum v_spectrum;
    Spectrum sb_spectrum;         // tesla^2/Hz over the analysis band
    NoiseModelFit v_fit;
    Measured sqrt_sb_at_probe;    // tesla/sqrt(Hz), band-averaged at probe_freq
    Measured omega3db_hz;         // from the fitted noise model
    Measured plateau;             // low-frequency S_B level
    double u_mean = 0.0;
};

struct SensitivityResult {
    Measured dv_db;
    Measured delta_omega_hz;      // from the responsivity sweep
    SensitivityArm coherent;
    SensitivityArm squeezed;      // filled when squeezing_db > 0 requested
    bool has_squeezed = false;
    Measured amplitude_ratio_at_probe;  // sqrt(S_B^sq / S_B^SQL) at probe_freq
    Measured bandwidth_ratio;           // omega3db squeezed / SQL
    Measured plateau_ratio;
};

// Full pipeline per the measured-sensitivity formula
// S_B = (dv/dB)^-2 S_v / |Rhat|^2. When squeeze_db > 0 the run is an A/B
// against the coherent probe with shared noise seeds; calibration and
// responsivity are measured once, on the coherent arm. Pass
// use_configured_response to skip the in-simulation calibration (faster,
// used by unit tests).
SensitivityResult sensitivity_run(const RunConfig& cfg, double squeeze_db,
                                  bool use_configured_response = false);

// --- backaction A/B ----------------------------------------------------------

struct BackactionResult {
    std::vector<double> scales;      // S3 PSD in units of shot_psd
    std::vector<Measured> var_fx;    // record-averaged F_x variance per scale
    std::vector<Measured> plateau;   // low-frequency S_v level per scale
    double max_plateau_deviation = 0.0;  // max |plateau_s/plateau_0 - 1|
    Measured fitted_var_slope;       // dVar(F_x)/dscale from the scan
    double predicted_var_slope = 0.0;  // linear-response prediction
};

// Paired-seed runs with the backaction drive scaled by `scales`, detection
// noise held at the coherent level throughout.
BackactionResult backaction_ab_test(const RunConfig& cfg,
                                    const std::vector<double>& scales = {1.0, 10.0,
                                                                         100.0});

// --- reporting ---------------------------------------------------------------

struct ExperimentReport {
    std::string scenario;
    std::string version = "bbopm 1.0.0";
    std::map<std::string, std::string> config_snapshot;
    std::map<std::string, Measured> derived;
    std::vector<std::string> spectra_files;

    std::string to_json() const;  // deterministic for fixed inputs
};

void write_text_file(const std::string& path, const std::string& content);

}  // namespace bbopm
