#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>

#include "bbopm/dsp.hpp"
#include "bbopm/rng.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace bbopm;
using cplx = std::complex<double>;

namespace {

PolarimeterRecord make_record(double fs, std::size_t n,
                              const std::function<double(double)>& fn) {
    PolarimeterRecord rec;
    rec.sample_rate = fs;
    rec.times.resize(n);
    rec.s2_samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rec.times[i] = static_cast<double>(i) / fs;
        rec.s2_samples[i] = fn(rec.times[i]);
    }
    return rec;
}

std::vector<std::vector<double>> white_records(int n_rec, std::size_t n, double sigma,
                                               std::uint64_t seed) {
    std::vector<std::vector<double>> recs(n_rec, std::vector<double>(n));
    for (int r = 0; r < n_rec; ++r) {
        CounterRng rng(seed, r, RngLane::probe);
        for (auto& x : recs[r]) x = sigma * rng.gaussian();
    }
    return recs;
}

double band_mean(const Spectrum& s, double lo, double hi) {
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t k = 0; k < s.freqs.size(); ++k) {
        if (s.freqs[k] < lo || s.freqs[k] > hi) continue;
        sum += s.psd[k];
        ++cnt;
    }
    return sum / cnt;
}

}  // namespace

TEST_CASE("fft matches the naive dft to 1e-9 relative") {
    CounterRng rng(42, 0, RngLane::scan);
    for (std::size_t n : {1024u, 1000u}) {  // radix-2 and Bluestein paths
        std::vector<cplx> x(n);
        for (auto& v : x) v = {rng.gaussian(), rng.gaussian()};
        auto ref = oracle::naive_dft(x);
        auto got = x;
        fft(got);
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            num += std::norm(got[k] - ref[k]);
            den += std::norm(ref[k]);
        }
        CHECK(std::sqrt(num / den) < 1e-9);
    }
}

TEST_CASE("lock-in gain convention on pure tones") {
    const double fs = 32768.0, f_ref = 2000.0;
    const std::size_t n = 32768;
    const double a = 1.7;

    auto cos_rec = make_record(fs, n, [&](double t) { return a * std::cos(two_pi * f_ref * t); });
    auto dm = lock_in(cos_rec, f_ref, 0.0, 950.0, 8);
    for (std::size_t i = 0; i < dm.u.size(); i += 37) {
        CHECK(dm.u[i] == doctest::Approx(a).epsilon(1e-3));
        CHECK(std::abs(dm.v[i]) < 1e-3 * a);
    }

    auto sin_rec = make_record(fs, n, [&](double t) { return std::sin(two_pi * f_ref * t); });
    dm = lock_in(sin_rec, f_ref, 0.0, 950.0, 8);
    for (std::size_t i = 0; i < dm.u.size(); i += 37) {
        CHECK(std::abs(dm.u[i]) < 1e-3);
        CHECK(dm.v[i] == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("lock-in rejects inconsistent plans") {
    auto rec = make_record(32768.0, 4096, [](double) { return 0.0; });
    CHECK_THROWS_AS(lock_in(rec, 20000.0, 0.0, 950.0, 8), std::invalid_argument);
    CHECK_THROWS_AS(lock_in(rec, 2000.0, 0.0, 1200.0, 8), std::invalid_argument);
    CHECK_THROWS_AS(lock_in(rec, 2000.0, 0.0, 950.0, 64), std::invalid_argument);
}

TEST_CASE("demodulated white noise folds to twice the raw PSD") {
    // raw single-sided PSD S = sigma^2 2/fs; the amplitude-true lock-in
    // returns u,v at 2S inside the low-pass band
    const double fs = 32768.0;
    const std::size_t n = 32768 + 222;
    const double sigma = 1.0;
    const double raw_psd = 2.0 * sigma * sigma / fs;

    std::vector<std::vector<double>> u_recs, v_recs;
    for (int r = 0; r < 40; ++r) {
        CounterRng rng(777, r, RngLane::probe);
        auto rec = make_record(fs, n, [&](double) { return sigma * rng.gaussian(); });
        auto dm = lock_in(rec, 2000.0, 0.3, 950.0, 8);
        u_recs.push_back(dm.u);
        v_recs.push_back(dm.v);
    }
    const Spectrum su = psd_hann(u_recs, fs / 8.0);
    const Spectrum sv = psd_hann(v_recs, fs / 8.0);
    const double lu = band_mean(su, 10.0, 850.0);
    const double lv = band_mean(sv, 10.0, 850.0);
    CHECK(lu / raw_psd == doctest::Approx(2.0).epsilon(0.03));
    CHECK(lv / raw_psd == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("psd normalization: white level is 2 sigma^2 / fs") {
    const double fs = 1000.0, sigma = 1.0;
    const auto recs = white_records(100, 1000, sigma, 4242);
    const Spectrum s = psd_hann(recs, fs);
    double level = 0.0;
    int cnt = 0;
    for (std::size_t k = 1; k + 1 < s.freqs.size(); ++k) {
        level += s.psd[k];
        ++cnt;
    }
    level /= cnt;
    CHECK(level == doctest::Approx(2.0 * sigma * sigma / fs).epsilon(0.03));
}

TEST_CASE("psd Parseval: bin-centered sine integrates to A^2/2") {
    const double fs = 4096.0, a = 3.0, f0 = 400.0;
    std::vector<std::vector<double>> recs(1, std::vector<double>(4096));
    for (std::size_t i = 0; i < recs[0].size(); ++i)
        recs[0][i] = a * std::cos(two_pi * f0 * i / fs);
    const Spectrum s = psd_hann(recs, fs);
    const std::size_t k0 = s.bin(f0);
    double peak = 0.0;
    for (std::size_t k = k0 - 2; k <= k0 + 2; ++k) peak += s.psd[k] * s.df();
    CHECK(peak == doctest::Approx(a * a / 2.0).epsilon(0.005));
}

TEST_CASE("psd is quadratic in the input scale") {
    auto recs = white_records(4, 512, 1.0, 9);
    auto scaled = recs;
    for (auto& r : scaled)
        for (auto& x : r) x *= 3.0;
    const Spectrum s1 = psd_hann(recs, 1000.0);
    const Spectrum s2 = psd_hann(scaled, 1000.0);
    for (std::size_t k = 0; k < s1.psd.size(); ++k)
        CHECK(s2.psd[k] == doctest::Approx(9.0 * s1.psd[k]).epsilon(1e-12));
}

TEST_CASE("window normalization: hann and rect agree on white noise") {
    const auto recs = white_records(200, 1024, 1.0, 31415);
    const Spectrum sh = psd_hann(recs, 1000.0, PsdWindow::hann);
    const Spectrum sr = psd_hann(recs, 1000.0, PsdWindow::rect);
    const double lh = band_mean(sh, 5.0, 495.0);
    const double lr = band_mean(sr, 5.0, 495.0);
    CHECK(lh / lr == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("psd rejects mismatched record lengths") {
    std::vector<std::vector<double>> recs{std::vector<double>(64),
                                          std::vector<double>(65)};
    CHECK_THROWS_AS(psd_hann(recs, 100.0), std::invalid_argument);
}

TEST_CASE("noise model fit recovers synthetic parameters within 2 sigma") {
    const double floor = 2.0, amp = 3.2, knee = 170.0;
    const int n_avg = 100;
    Spectrum s;
    s.record_seconds = 0.5;
    s.n_averages = n_avg;
    CounterRng rng(2024, 0, RngLane::scan);
    for (int k = 0; k <= 425; ++k) {
        const double f = 2.0 * k;
        const double model = floor + amp * knee * knee / (f * f + knee * knee);
        // chi^2_{2n}/2n multiplicative noise, Gaussian approximation
        const double val = model * (1.0 + rng.gaussian() / std::sqrt(n_avg));
        s.freqs.push_back(f);
        s.psd.push_back(std::max(val, 1e-6));
    }
    const NoiseModelFit fit = fit_noise_model(s, 10.0, 850.0);
    CHECK(std::fabs(fit.floor.value - floor) < 2.0 * fit.floor.stderr_);
    CHECK(std::fabs(fit.lorentzian_amplitude.value - amp) <
          2.0 * fit.lorentzian_amplitude.stderr_);
    CHECK(std::fabs(fit.bandwidth_hz.value - knee) < 2.0 * fit.bandwidth_hz.stderr_);
}

TEST_CASE("noise model fit flags a vanishing Lorentzian amplitude") {
    Spectrum s;
    s.record_seconds = 0.5;
    s.n_averages = 50;
    CounterRng rng(77, 0, RngLane::scan);
    for (int k = 0; k <= 425; ++k) {
        s.freqs.push_back(2.0 * k);
        s.psd.push_back(2.0 * (1.0 + rng.gaussian() / std::sqrt(50.0)));
    }
    CHECK_THROWS_WITH_AS(fit_noise_model(s, 10.0, 850.0),
                         doctest::Contains("unidentifiable"), std::runtime_error);
}

TEST_CASE("spectrum csv round-trips") {
    Spectrum s;
    s.record_seconds = 0.5;
    s.n_averages = 7;
    for (int k = 0; k < 16; ++k) {
        s.freqs.push_back(2.0 * k);
        s.psd.push_back(1.0 + 0.1 * k);
        s.psd_stderr.push_back(0.01 * k);
    }
    const std::string path = "/tmp/bbopm_test_spectrum.csv";
    write_spectrum_csv(s, path, "test");
    const Spectrum r = read_spectrum_csv(path);
    REQUIRE(r.freqs.size() == s.freqs.size());
    CHECK(r.n_averages == 7);
    CHECK(r.record_seconds == doctest::Approx(0.5));
    for (std::size_t k = 0; k < s.freqs.size(); ++k) {
        CHECK(r.psd[k] == doctest::Approx(s.psd[k]).epsilon(1e-15));
        CHECK(r.psd_stderr[k] == doctest::Approx(s.psd_stderr[k]).epsilon(1e-15));
    }
    std::remove(path.c_str());
}
