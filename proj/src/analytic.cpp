#include "bbopm/analytic.hpp"

#include <cmath>

namespace bbopm {

std::complex<double> steady_state(const EnsembleConfig& cfg, const PumpProgram& pump,
                                  double detuning_rad) {
    const double gp = cfg.gamma_rel + cycle_mean(pump);
    require(gp > 0.0, "steady_state: Gamma + Pbar must be > 0");
    const std::complex<double> denom{gp, detuning_rad};
    return harmonic_amplitude(pump) * cfg.f_max() / denom;
}

std::complex<double> responsivity(const AnalyticParams& p, double omega_rad) {
    p.validate();
    return p.gamma * p.u_mean / std::complex<double>{p.delta_omega, -omega_rad};
}

double lineshape(const AnalyticParams& p, double omega_rad) {
    const double dw2 = p.delta_omega * p.delta_omega;
    return dw2 / (omega_rad * omega_rad + dw2);
}

double signal_noise_spectrum(const AnalyticParams& p, double omega_rad) {
    return p.s_shot + lineshape(p, omega_rad) * p.s_sigma;
}

double sensitivity(const AnalyticParams& p, double omega_rad) {
    require(p.u_mean != 0.0, "sensitivity: zero signal amplitude");
    const double dw2 = p.delta_omega * p.delta_omega;
    const double gu2 = p.gamma * p.gamma * p.u_mean * p.u_mean;
    return dw2 / gu2 * (p.s_sigma + p.s_shot / lineshape(p, omega_rad));
}

double squeezed_ratio(const AnalyticParams& p, double omega_rad) {
    require(p.zeta2() > 0.0, "squeezed_ratio: zeta2 must be > 0");
    const double lz = lineshape(p, omega_rad) * p.zeta2();
    return (lz + p.xi2) / (lz + 1.0);
}

double squeezed_ratio_printed_form(const AnalyticParams& p, double omega_rad) {
    require(p.zeta2() > 0.0, "squeezed_ratio: zeta2 must be > 0");
    const double l_over_z = lineshape(p, omega_rad) / p.zeta2();
    return (1.0 + l_over_z * p.xi2) / (1.0 + l_over_z);
}

Bandwidth3dB bandwidth_3db(const AnalyticParams& p) {
    p.validate();
    const double z2 = p.zeta2();
    Bandwidth3dB bw;
    bw.sql_hz = rad_to_hz(p.delta_omega) * std::sqrt(z2 + 1.0);
    bw.squeezed_hz = bw.sql_hz * std::sqrt((1.0 + z2 / p.xi2) / (1.0 + z2));
    return bw;
}

std::complex<double> quadrature_response(const AnalyticParams& p, double omega_rad,
                                         double detuning_rad) {
    p.validate();
    // (-i w + dw) Re[F+] - d Im[F+] = 0
    //  d Re[F+] + (-i w + dw) Im[F+] = gamma B F+^(0)  (unit drive here)
    // solved for the measured quadrature Im[F+] scaled to signal units
    const std::complex<double> a{p.delta_omega, -omega_rad};
    const double d = detuning_rad;
    const std::complex<double> det = a * a + d * d;
    return p.gamma * p.u_mean * a / det;
}

}  // namespace bbopm
