#include <cmath>
#include <complex>

#include "bbopm/analytic.hpp"
#include "bbopm/rng.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace bbopm;

namespace {

// the operating point every headline number derives from
AnalyticParams paper_point() {
    const double zeta2 = std::pow(275.0 / 170.0, 2.0) - 1.0;
    return AnalyticParams::from_ratios(hz_to_rad(170.0), zeta2, xi2_from_db(1.9), 1.0,
                                       1.0e4, -44076544929.8648);
}

}  // namespace

TEST_CASE("steady state: resonant value, half width, saturation bound") {
    EnsembleConfig cfg;
    cfg.atom_count = 1e6;
    cfg.gamma_rel = 534.07;
    PumpProgram pump{5340.7, 0.1, two_pi * 2000.0, 0.0};
    const double gp = cfg.gamma_rel + cycle_mean(pump);

    const auto res = steady_state(cfg, pump, 0.0);
    CHECK(res.imag() == doctest::Approx(0.0));
    CHECK(res.real() ==
          doctest::Approx(std::abs(harmonic_amplitude(pump)) * cfg.f_max() / gp));

    CHECK(std::abs(steady_state(cfg, pump, gp)) ==
          doctest::Approx(std::abs(res) / std::sqrt(2.0)).epsilon(1e-12));

    // polarization never exceeds Fmax P+/Pbar however hard the pump runs
    for (double p0 : {10.0, 1e3, 1e5, 1e7, 1e9}) {
        PumpProgram hard{p0, 0.1, two_pi * 2000.0, 0.0};
        const double bound = cfg.f_max() * std::abs(harmonic_amplitude(hard)) /
                             cycle_mean(hard);
        CHECK(std::abs(steady_state(cfg, hard, 0.0)) <= bound * (1.0 + 1e-12));
        CHECK(bound <= cfg.f_max() * (1.0 + 1e-12));
    }
}

TEST_CASE("responsivity: DC limit and knee") {
    const AnalyticParams p = paper_point();
    const auto r0 = responsivity(p, 0.0);
    CHECK(std::abs(r0) == doctest::Approx(std::fabs(p.gamma) * p.u_mean / p.delta_omega));
    const double r_knee = std::norm(responsivity(p, p.delta_omega));
    CHECK(r_knee / std::norm(r0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lineshape values") {
    const AnalyticParams p = paper_point();
    CHECK(lineshape(p, 0.0) == 1.0);
    CHECK(lineshape(p, p.delta_omega) == doctest::Approx(0.5));
    CHECK(lineshape(p, hz_to_rad(490.0)) == doctest::Approx(0.1074).epsilon(5e-4));
    CHECK(lineshape(p, hz_to_rad(200.0)) > lineshape(p, hz_to_rad(300.0)));
}

TEST_CASE("signal noise spectrum limits") {
    const AnalyticParams p = paper_point();
    CHECK(signal_noise_spectrum(p, hz_to_rad(1e9)) == doctest::Approx(p.s_shot).epsilon(1e-6));
    CHECK(signal_noise_spectrum(p, 0.0) == doctest::Approx(p.s_shot + p.s_sigma));
}

TEST_CASE("sensitivity: spin-noise-limited flatness and the 3 dB identity") {
    AnalyticParams p = paper_point();
    AnalyticParams pure = p;
    pure.s_shot = 0.0;
    CHECK(sensitivity(pure, 0.0) ==
          doctest::Approx(sensitivity(pure, hz_to_rad(2000.0))).epsilon(1e-12));

    // S_B at the returned 3 dB frequency doubles the DC value, both arms
    const Bandwidth3dB bw = bandwidth_3db(p);
    AnalyticParams sql = p;
    sql.s_shot = sql.s_shot_sql;
    sql.xi2 = 1.0;
    CHECK(sensitivity(sql, hz_to_rad(bw.sql_hz)) / sensitivity(sql, 0.0) ==
          doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sensitivity(p, hz_to_rad(bw.squeezed_hz)) / sensitivity(p, 0.0) ==
          doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("paper operating point: 600 -> 500 fT and the bandwidth numbers") {
    const AnalyticParams p = paper_point();
    const double w490 = hz_to_rad(490.0);
    const double ratio = squeezed_ratio(p, w490);
    CHECK(ratio == doctest::Approx(0.698).epsilon(1e-3));
    const double amp_ratio = std::sqrt(ratio);
    CHECK(amp_ratio == doctest::Approx(0.836).epsilon(1e-3));
    CHECK(600.0 * amp_ratio == doctest::Approx(501.0).epsilon(2e-3));

    const Bandwidth3dB bw = bandwidth_3db(p);
    CHECK(bw.sql_hz == doctest::Approx(275.0).epsilon(1e-4));
    CHECK(bw.squeezed_hz == doctest::Approx(318.2).epsilon(1e-3));
    CHECK(std::fabs(bw.squeezed_hz - 320.0) / 320.0 < 0.02);
    CHECK(p.zeta2() == doctest::Approx(1.617).epsilon(1e-3));
}

TEST_CASE("squeezed ratio limits") {
    AnalyticParams p = paper_point();
    AnalyticParams unsqueezed = p;
    unsqueezed.xi2 = 1.0;
    unsqueezed.s_shot = p.s_shot_sql;
    for (double f : {0.0, 100.0, 490.0, 5e4}) {
        CHECK(squeezed_ratio(unsqueezed, hz_to_rad(f)) == doctest::Approx(1.0));
    }
    CHECK(squeezed_ratio(p, hz_to_rad(1e9)) == doctest::Approx(p.xi2).epsilon(1e-6));
}

TEST_CASE("printed ratio arrangement disagrees with the sensitivity formula") {
    // kept exposed on purpose: the two arrangements differ, and only the
    // derived one reproduces the quoted enhancement numbers
    const AnalyticParams p = paper_point();
    const double w = hz_to_rad(490.0);
    CHECK(squeezed_ratio_printed_form(p, w) == doctest::Approx(0.9779).epsilon(1e-3));
    CHECK(squeezed_ratio_printed_form(p, w) != doctest::Approx(squeezed_ratio(p, w)));
    // and in the high-frequency limit it misses the xi2 floor entirely
    CHECK(squeezed_ratio_printed_form(p, hz_to_rad(1e9)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bandwidth gain limits in zeta2") {
    AnalyticParams p = paper_point();
    p.xi2 = 1.0;
    p.s_shot = p.s_shot_sql;
    const Bandwidth3dB same = bandwidth_3db(p);
    CHECK(same.squeezed_hz == doctest::Approx(same.sql_hz));

    // no spin noise: squeezing scales the whole spectrum uniformly, so the
    // relative 3 dB point cannot move
    AnalyticParams ns = paper_point();
    ns.s_sigma = 1e-12;  // zeta2 -> 0
    const Bandwidth3dB b = bandwidth_3db(ns);
    CHECK(b.squeezed_hz / b.sql_hz == doctest::Approx(1.0).epsilon(1e-9));

    // spin-noise dominated: the gain saturates at 1/xi
    AnalyticParams sd = paper_point();
    sd.s_sigma = 1e9 * sd.s_shot_sql;
    const Bandwidth3dB c = bandwidth_3db(sd);
    CHECK(c.squeezed_hz / c.sql_hz ==
          doctest::Approx(1.0 / std::sqrt(sd.xi2)).epsilon(1e-6));
}

TEST_CASE("matched noise: lineshape equals the normalized response power") {
    const AnalyticParams p = paper_point();
    CounterRng rng(17, 0, RngLane::scan);
    for (int i = 0; i < 200; ++i) {
        const double w = hz_to_rad(3000.0 * rng.next_unit());
        const double rhat2 = std::norm(responsivity(p, w) / responsivity(p, 0.0));
        CHECK(lineshape(p, w) == doctest::Approx(rhat2).epsilon(1e-12));
    }
}

TEST_CASE("sensitivity is the noise spectrum over the response power, identically") {
    const AnalyticParams p = paper_point();
    CounterRng rng(18, 0, RngLane::scan);
    for (int i = 0; i < 200; ++i) {
        const double w = hz_to_rad(3000.0 * rng.next_unit());
        const double direct = sensitivity(p, w);
        const double via_rv = signal_noise_spectrum(p, w) / std::norm(responsivity(p, w));
        CHECK(direct == doctest::Approx(via_rv).epsilon(1e-12));
    }
}

TEST_CASE("squeezing never increases the magnetic noise at any frequency") {
    const AnalyticParams p = paper_point();
    CounterRng rng(19, 0, RngLane::scan);
    for (int i = 0; i < 300; ++i) {
        const double w = hz_to_rad(5000.0 * rng.next_unit());
        CHECK(squeezed_ratio(p, w) <= 1.0 + 1e-12);
        CHECK(squeezed_ratio(p, w) >= p.xi2 - 1e-12);
    }
}

TEST_CASE("general-detuning quadrature response against the 2x2 oracle") {
    const AnalyticParams p = paper_point();
    CounterRng rng(20, 0, RngLane::scan);
    for (int i = 0; i < 200; ++i) {
        const double w = hz_to_rad(2000.0 * rng.next_unit());
        const double d = hz_to_rad(800.0 * (rng.next_unit() - 0.5));
        const auto got = quadrature_response(p, w, d);
        const auto ref = p.gamma * p.u_mean * oracle::first_order_solve(p.delta_omega, d, w);
        CHECK(std::abs(got - ref) <= 1e-12 * std::abs(ref));
    }
    // resonant specialization equals the responsivity
    const double w = hz_to_rad(137.0);
    const auto r = responsivity(p, w);
    const auto q = quadrature_response(p, w, 0.0);
    CHECK(std::abs(r - q) < 1e-12 * std::abs(r));
}
