#include "bbopm/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bbopm {

namespace {

double bessel_i0(double x) {
    // power series, converges fast for the beta values used here
    double sum = 1.0, term = 1.0;
    const double x2 = 0.25 * x * x;
    for (int k = 1; k < 60; ++k) {
        term *= x2 / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

}  // namespace

std::vector<double> design_lowpass_fir(double sample_rate, double pass_hz, double stop_hz,
                                       double atten_db) {
    require(stop_hz > pass_hz && pass_hz > 0.0, "fir: need stop_hz > pass_hz > 0");
    require(stop_hz < sample_rate / 2.0, "fir: stop_hz must be below Nyquist");
    const double dw = two_pi * (stop_hz - pass_hz) / sample_rate;
    const double beta = atten_db > 50.0 ? 0.1102 * (atten_db - 8.7)
                        : atten_db > 21.0
                            ? 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0)
                            : 0.0;
    int n = static_cast<int>(std::ceil((atten_db - 7.95) / (2.285 * dw))) + 1;
    if (n % 2 == 0) ++n;  // odd length, integer group delay

    const double fc = 0.5 * (pass_hz + stop_hz) / sample_rate;  // cycles/sample
    const int half = (n - 1) / 2;
    std::vector<double> h(n);
    const double i0b = bessel_i0(beta);
    for (int i = 0; i < n; ++i) {
        const int m = i - half;
        const double sinc = m == 0 ? 2.0 * fc
                                   : std::sin(two_pi * fc * m) / (std::numbers::pi * m);
        const double r = static_cast<double>(m) / half;
        const double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h[i] = sinc * w;
    }
    const double s = std::accumulate(h.begin(), h.end(), 0.0);
    for (auto& x : h) x /= s;  // exact unit DC gain
    return h;
}

int lock_in_fir_taps(double sample_rate, double f_ref, double lp_cutoff) {
    return static_cast<int>(design_lowpass_fir(sample_rate, lp_cutoff, f_ref).size());
}

DemodRecord lock_in(const PolarimeterRecord& rec, double f_ref, double phase,
                    double lp_cutoff, int decim) {
    const double fs = rec.sample_rate;
    require(2.0 * f_ref < fs, "lock_in: need 2 f_ref < sample_rate");
    require(lp_cutoff > 0.0 && lp_cutoff < f_ref / 2.0,
            "lock_in: need 0 < lp_cutoff < f_ref/2");
    require(decim >= 1, "lock_in: decim must be >= 1");
    if (fs / decim < 2.0 * lp_cutoff)
        throw std::invalid_argument(
            "lock_in: invalid plan, decimated rate below 2*lp_cutoff");

    const std::vector<double> h = design_lowpass_fir(fs, lp_cutoff, f_ref);
    const int taps = static_cast<int>(h.size());
    const int delay = (taps - 1) / 2;
    const std::size_t n = rec.s2_samples.size();
    require(n > static_cast<std::size_t>(2 * delay),
            "lock_in: record shorter than the filter edges");

    // mix with gain 2: u picks up the cos quadrature amplitude-true
    std::vector<double> mu(n), mv(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double arg = two_pi * f_ref * rec.times[i] + phase;
        mu[i] = 2.0 * rec.s2_samples[i] * std::cos(arg);
        mv[i] = 2.0 * rec.s2_samples[i] * std::sin(arg);
    }

    // centered FIR on the valid region only, then decimate; the group
    // delay is removed by construction
    DemodRecord out;
    out.f_ref = f_ref;
    out.phase_ref = phase;
    out.sample_rate = fs / decim;
    const std::size_t n_out = (n - 2 * static_cast<std::size_t>(delay) +
                               static_cast<std::size_t>(decim) - 1) /
                              static_cast<std::size_t>(decim);
    out.times.resize(n_out);
    out.u.resize(n_out);
    out.v.resize(n_out);
    for (std::size_t k = 0; k < n_out; ++k) {
        const std::size_t c = static_cast<std::size_t>(delay) + k * decim;
        double su = 0.0, sv = 0.0;
        const double* hu = h.data();
        const std::size_t base = c - delay;
        for (int j = 0; j < taps; ++j) {
            su += hu[j] * mu[base + j];
            sv += hu[j] * mv[base + j];
        }
        out.times[k] = rec.times[c];
        out.u[k] = su;
        out.v[k] = sv;
    }
    return out;
}

Spectrum psd_hann(const std::vector<std::vector<double>>& records, double sample_rate,
                  PsdWindow window) {
    require(!records.empty() && !records[0].empty(), "psd: no records");
    const std::size_t n = records[0].size();
    for (const auto& r : records)
        require(r.size() == n, "psd: records must have equal length");

    std::vector<double> w(n, 1.0);
    if (window == PsdWindow::hann) {
        for (std::size_t i = 0; i < n; ++i)
            w[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / n);
    }
    const double w2 = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);

    const std::size_t n_bins = n / 2 + 1;
    std::vector<double> mean(n_bins, 0.0), m2(n_bins, 0.0);
    std::vector<std::complex<double>> buf(n);
    int count = 0;
    for (const auto& rec : records) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = {rec[i] * w[i], 0.0};
        fft(buf);
        ++count;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const double scale = (k == 0 || 2 * k == n) ? 1.0 : 2.0;  // single-sided
            const double p = scale * std::norm(buf[k]) / (sample_rate * w2);
            const double d = p - mean[k];
            mean[k] += d / count;
            m2[k] += d * (p - mean[k]);
        }
    }

    Spectrum spec;
    spec.n_averages = count;
    spec.window = window == PsdWindow::hann ? "hann" : "rect";
    spec.record_seconds = static_cast<double>(n) / sample_rate;
    spec.freqs.resize(n_bins);
    spec.psd = std::move(mean);
    if (count > 1) {
        spec.psd_stderr.resize(n_bins);
        for (std::size_t k = 0; k < n_bins; ++k)
            spec.psd_stderr[k] = std::sqrt(m2[k] / (count - 1.0) / count);
    }
    const double df = sample_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < n_bins; ++k) spec.freqs[k] = df * static_cast<double>(k);
    spec.validate();
    return spec;
}

namespace {

struct Lorentz {
    static double shape(double f, double bw) {
        return bw * bw / (f * f + bw * bw);
    }
    static double d_bw(double f, double bw) {
        const double d = f * f + bw * bw;
        return 2.0 * bw * f * f / (d * d);
    }
};

bool solve3(double a[3][3], double b[3], double x[3]) {
    // Gaussian elimination with partial pivoting
    int idx[3] = {0, 1, 2};
    for (int c = 0; c < 3; ++c) {
        int p = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::fabs(a[idx[r]][c]) > std::fabs(a[idx[p]][c])) p = r;
        std::swap(idx[c], idx[p]);
        if (std::fabs(a[idx[c]][c]) < 1e-300) return false;
        for (int r = c + 1; r < 3; ++r) {
            const double m = a[idx[r]][c] / a[idx[c]][c];
            for (int k = c; k < 3; ++k) a[idx[r]][k] -= m * a[idx[c]][k];
            b[idx[r]] -= m * b[idx[c]];
        }
    }
    for (int c = 2; c >= 0; --c) {
        double s = b[idx[c]];
        for (int k = c + 1; k < 3; ++k) s -= a[idx[c]][k] * x[k];
        x[c] = s / a[idx[c]][c];
    }
    return true;
}

}  // namespace

namespace {

// Shared engine for the two fit entry points. When anchor is true the
// floor stays pinned at its input value and only (amp, knee) move.
NoiseModelFit fit_lorentz_model(const Spectrum& spec, double fmin_hz, double fmax_hz,
                                bool anchor, double floor_value) {
    spec.validate();
    std::vector<double> f, y;
    const double fmax = fmax_hz > 0.0 ? fmax_hz : spec.freqs.back();
    for (std::size_t k = 0; k < spec.freqs.size(); ++k) {
        if (spec.freqs[k] <= 0.0) continue;  // skip DC
        if (spec.freqs[k] < fmin_hz || spec.freqs[k] > fmax) continue;
        f.push_back(spec.freqs[k]);
        y.push_back(spec.psd[k]);
    }
    require(f.size() >= 8, "fit: too few bins in the requested band");

    // initial guesses: floor from the top of the band, amplitude from the
    // bottom, knee from the half-amplitude crossing
    const std::size_t m = f.size();
    const std::size_t tail = std::max<std::size_t>(m / 8, 2);
    double floor0 = 0.0, low0 = 0.0;
    for (std::size_t k = m - tail; k < m; ++k) floor0 += y[k];
    floor0 /= static_cast<double>(tail);
    for (std::size_t k = 0; k < tail; ++k) low0 += y[k];
    low0 /= static_cast<double>(tail);
    if (anchor) floor0 = floor_value;
    double amp0 = low0 - floor0;

    const double n_avg = std::max(1, spec.n_averages);
    const double rel = 1.0 / std::sqrt(n_avg * static_cast<double>(tail));
    if (!(amp0 > 3.0 * rel * floor0))
        throw std::runtime_error(
            "fit failed: Lorentzian amplitude consistent with zero, bandwidth "
            "unidentifiable");

    double bw0 = f[m / 2];
    const double half = floor0 + 0.5 * amp0;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        if (y[k] >= half && y[k + 1] < half) {
            bw0 = 0.5 * (f[k] + f[k + 1]);
            break;
        }
    }

    // Two weighting stages: first with sigma_i from the data, then from the
    // stage-1 model (removes the bias of weighting by noisy bins). Weights
    // stay fixed inside each Levenberg-Marquardt loop. The floor, when
    // anchored, is excluded from the update by zeroing its column.
    double p[3] = {floor0, amp0, bw0};
    std::vector<double> sigma(m);
    int it_total = 0;
    for (int stage = 0; stage < 2; ++stage) {
        for (std::size_t k = 0; k < m; ++k) {
            const double base =
                stage == 0 ? y[k] : p[0] + p[1] * Lorentz::shape(f[k], p[2]);
            sigma[k] = std::max(base, 1e-300) / std::sqrt(n_avg);
        }
        auto chi2_of = [&](const double q[3]) {
            double c = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double r = y[k] - (q[0] + q[1] * Lorentz::shape(f[k], q[2]));
                c += r * r / (sigma[k] * sigma[k]);
            }
            return c;
        };

        double lambda = 1e-3;
        double chi2 = chi2_of(p);
        int it = 0;
        for (; it < 100; ++it) {
            double jtj[3][3] = {{0}}, jtr[3] = {0};
            for (std::size_t k = 0; k < m; ++k) {
                const double L = Lorentz::shape(f[k], p[2]);
                const double wgt = 1.0 / (sigma[k] * sigma[k]);
                const double r = y[k] - (p[0] + p[1] * L);
                const double j[3] = {anchor ? 0.0 : 1.0, L,
                                     p[1] * Lorentz::d_bw(f[k], p[2])};
                for (int a = 0; a < 3; ++a) {
                    jtr[a] += wgt * j[a] * r;
                    for (int b = 0; b < 3; ++b) jtj[a][b] += wgt * j[a] * j[b];
                }
            }
            if (anchor) jtj[0][0] = 1.0;  // keeps the system regular; dp[0] = 0

            double a[3][3], b[3], dp[3];
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) a[r][c] = jtj[r][c];
                a[r][r] *= 1.0 + lambda;
                b[r] = jtr[r];
            }
            if (!solve3(a, b, dp)) throw std::runtime_error("fit failed: singular system");

            double q[3] = {p[0] + dp[0], p[1] + dp[1], p[2] + dp[2]};
            if (q[2] <= 0.0) q[2] = 0.5 * p[2];
            const double chi2_new = chi2_of(q);
            if (chi2_new <= chi2) {
                const bool done = chi2 - chi2_new < 1e-10 * (1.0 + chi2);
                p[0] = q[0];
                p[1] = q[1];
                p[2] = q[2];
                chi2 = chi2_new;
                lambda = std::max(lambda * 0.3, 1e-12);
                if (done) break;
            } else {
                lambda *= 10.0;
                if (lambda > 1e14) break;  // stuck at a flat spot; accept p as is
            }
        }
        if (it >= 100) throw std::runtime_error("fit failed: iteration limit");
        it_total += it;
    }

    if (!(p[2] > 0.0) || p[2] > fmax / 4.0)
        throw std::runtime_error(
            "fit failed: fitted knee too close to the band edge (need max freq >= 5x "
            "bandwidth)");

    // covariance from the final weighted normal matrix
    double jtj[3][3] = {{0}};
    double chi2 = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double L = Lorentz::shape(f[k], p[2]);
        const double model = p[0] + p[1] * L;
        const double sg = std::max(model, 1e-300) / std::sqrt(n_avg);
        const double wgt = 1.0 / (sg * sg);
        const double j[3] = {anchor ? 0.0 : 1.0, L, p[1] * Lorentz::d_bw(f[k], p[2])};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) jtj[a][b] += wgt * j[a] * j[b];
        const double r = y[k] - model;
        chi2 += wgt * r * r;
    }
    if (anchor) jtj[0][0] = 1.0;
    const std::size_t dof = m - (anchor ? 2 : 3);
    const double chi2_red = chi2 / std::max<std::size_t>(dof, 1);
    double se[3];
    for (int a = 0; a < 3; ++a) {
        // diagonal of the inverse via cofactors
        double mat[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) mat[r][c] = jtj[r][c];
        const double det = mat[0][0] * (mat[1][1] * mat[2][2] - mat[1][2] * mat[2][1]) -
                           mat[0][1] * (mat[1][0] * mat[2][2] - mat[1][2] * mat[2][0]) +
                           mat[0][2] * (mat[1][0] * mat[2][1] - mat[1][1] * mat[2][0]);
        if (std::fabs(det) < 1e-300)
            throw std::runtime_error("fit failed: singular covariance");
        const int r1 = (a + 1) % 3, r2 = (a + 2) % 3;
        const double cof = mat[r1][(a + 1) % 3] * mat[r2][(a + 2) % 3] -
                           mat[r1][(a + 2) % 3] * mat[r2][(a + 1) % 3];
        se[a] = std::sqrt(std::fabs(cof / det) * std::max(1.0, chi2_red));
    }
    if (anchor) se[0] = 0.0;

    NoiseModelFit out;
    out.floor = {p[0], se[0]};
    out.lorentzian_amplitude = {p[1], se[1]};
    out.bandwidth_hz = {p[2], se[2]};
    out.chi2_reduced = chi2_red;
    out.iterations = it_total;
    return out;
}

}  // namespace

NoiseModelFit fit_noise_model(const Spectrum& spec, double fmin_hz, double fmax_hz) {
    return fit_lorentz_model(spec, fmin_hz, fmax_hz, false, 0.0);
}

NoiseModelFit fit_noise_model_anchored(const Spectrum& spec, double floor_value,
                                       double fmin_hz, double fmax_hz) {
    require(floor_value > 0.0, "fit: anchored floor must be > 0");
    return fit_lorentz_model(spec, fmin_hz, fmax_hz, true, floor_value);
}

void write_spectrum_csv(const Spectrum& spec, const std::string& path,
                        const std::string& label) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    char buf[128];
    os << "# " << label << "\n";
    os << "# window=" << spec.window << " n_averages=" << spec.n_averages
       << " record_seconds=";
    std::snprintf(buf, sizeof buf, "%.17g", spec.record_seconds);
    os << buf << "\n";
    os << "freq_hz,psd,psd_stderr\n";
    for (std::size_t k = 0; k < spec.freqs.size(); ++k) {
        const double se = spec.psd_stderr.empty() ? 0.0 : spec.psd_stderr[k];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", spec.freqs[k], spec.psd[k], se);
        os << buf;
    }
}

Spectrum read_spectrum_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Spectrum spec;
    spec.n_averages = 1;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') {
            auto pos = line.find("n_averages=");
            if (pos != std::string::npos) spec.n_averages = std::atoi(line.c_str() + pos + 11);
            pos = line.find("record_seconds=");
            if (pos != std::string::npos) spec.record_seconds = std::atof(line.c_str() + pos + 15);
            continue;
        }
        if (line.rfind("freq_hz", 0) == 0) continue;
        std::istringstream ss(line);
        double fq, p, se;
        char comma;
        if (ss >> fq >> comma >> p >> comma >> se) {
            spec.freqs.push_back(fq);
            spec.psd.push_back(p);
            spec.psd_stderr.push_back(se);
        }
    }
    if (spec.record_seconds <= 0.0 && spec.freqs.size() > 1)
        spec.record_seconds = 1.0 / (spec.freqs[1] - spec.freqs[0]);
    return spec;
}

}  // namespace bbopm
