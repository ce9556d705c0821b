// Lock-in demodulation, Hann-window PSD estimation, and the two-term
// noise-model fit.
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "bbopm/model.hpp"
#include "bbopm/probe.hpp"

namespace bbopm {

// In-place forward DFT, any length (radix-2 plus Bluestein fallback).
void fft(std::vector<std::complex<double>>& data);

// Lock-in outputs on the decimated grid. Gain convention: an input
// A cos(2 pi f_ref t + phase) yields u = A, v = 0; the quadrature
// reference is sin, so A sin(...) yields v = A. Note that under this
// amplitude-true convention white input noise of single-sided PSD S comes
// out with PSD 2S in each of u and v (both sidebands fold in).
struct DemodRecord {
    std::vector<double> times;  // decimated grid, filter edges dropped
    std::vector<double> u;
    std::vector<double> v;
    double sample_rate = 0.0;   // decimated rate, Hz
    double f_ref = 0.0;         // Hz
    double phase_ref = 0.0;     // rad
};

// Linear-phase FIR low-pass (Kaiser window), unit DC gain, odd tap count.
// stop_hz is where the stopband (atten_db down) begins.
std::vector<double> design_lowpass_fir(double sample_rate, double pass_hz, double stop_hz,
                                       double atten_db = 110.0);

// Taps of the filter lock_in will use, exposed so callers can size records
// to absorb the (taps-1)/2-sample group delay at each end.
int lock_in_fir_taps(double sample_rate, double f_ref, double lp_cutoff);

// Demodulate at f_ref, low-pass, drop the filter's group-delay edges, and
// decimate by decim. The output covers times
// [delay, n-1-delay] of the input in steps of decim samples.
DemodRecord lock_in(const PolarimeterRecord& rec, double f_ref, double phase,
                    double lp_cutoff, int decim);

enum class PsdWindow { hann, rect };

// Single-sided, record-averaged PSD. Normalization: white Gaussian noise
// of variance sigma^2 sampled at f_s comes out at the level 2 sigma^2/f_s;
// the window is compensated by its mean square, and a bin-centered sine of
// amplitude A integrates to A^2/2 across its peak.
Spectrum psd_hann(const std::vector<std::vector<double>>& records, double sample_rate,
                  PsdWindow window = PsdWindow::hann);

// Least-squares fit of a spectrum to floor + amp * L(f), with the
// Lorentzian L(f) = bw^2/(f^2 + bw^2). Weighted by the chi^2 statistics of
// the averaged periodogram.
struct NoiseModelFit {
    Measured floor;
    Measured lorentzian_amplitude;
    Measured bandwidth_hz;
    double chi2_reduced = 0.0;
    int iterations = 0;
};

// Throws std::runtime_error on non-convergence or when the Lorentzian
// amplitude is consistent with zero (bandwidth unidentifiable). fmin/fmax
// restrict the fitted band; fmax <= 0 uses the full spectrum.
NoiseModelFit fit_noise_model(const Spectrum& spec, double fmin_hz = 0.0,
                              double fmax_hz = 0.0);

// Same model with the floor pinned to an independently measured value
// (e.g. an atoms-off shot-noise record). Removes the floor/knee degeneracy
// that dominates the knee error of the free fit.
NoiseModelFit fit_noise_model_anchored(const Spectrum& spec, double floor_value,
                                       double fmin_hz = 0.0, double fmax_hz = 0.0);

// CSV with '#'-prefixed metadata lines, then freq_hz,psd,psd_stderr rows.
void write_spectrum_csv(const Spectrum& spec, const std::string& path,
                        const std::string& label);
Spectrum read_spectrum_csv(const std::string& path);

}  // namespace bbopm
